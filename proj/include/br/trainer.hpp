#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "br/metrics.hpp"
#include "br/pipeline.hpp"
#include "br/reghead.hpp"

namespace br {

struct TrainConfig {
  double peak_lr = 4e-4;
  double warmup_frac = 0.03;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 5;
  std::size_t patience = 1;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

// AdamW moments, shaped like the head.
struct OptimizerState {
  HeadGrads m;
  HeadGrads v;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(const HeadParams& p);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// (1/N) sum (pred - target)^2
double mse_loss(std::span<const double> preds, std::span<const double> targets);

// ceil(warmup_frac * total_steps), at least 1.
std::size_t warmup_steps(std::size_t total_steps, const TrainConfig& cfg);

// Linear warmup to peak over W steps (peak * (step+1)/W), then linear decay to
// zero at total_steps (peak * (total - step)/(total - W)).
double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

// Decoupled weight decay (weights only, not biases) followed by the
// bias-corrected adaptive step. Throws "diverged" on a non-finite gradient.
void optimizer_step(HeadParams& params, const HeadGrads& grads, OptimizerState& state, double lr,
                    const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_rmse = 0.0;
  double val_plcc = 0.0;
  double val_srcc = 0.0;
};

struct TrainResult {
  HeadParams best;
  std::size_t best_epoch = 0;
  metrics::EvalReport best_report;
  std::vector<EpochRecord> history;
};

// Eval-mode predictions for every row of the feature set.
std::vector<double> predict(const HeadParams& params, const FeatureSet& data);

// RMSE plus correlations; a constant prediction vector has no defined
// correlation and is scored 0 so that training can continue.
metrics::EvalReport validation_report(const HeadParams& params, const FeatureSet& val);

using Validator = std::function<metrics::EvalReport(const HeadParams&)>;

// Mini-batch AdamW on per-sample squared error averaged over each batch. After
// every epoch the validator scores the head; the best-PLCC params are kept and
// training stops after `patience` epochs without improvement, or once the
// training MSE reaches exactly zero.
TrainResult train(const FeatureSet& train_set, HeadParams init, const TrainConfig& cfg, const Validator& validate);

// Same, validating on `val_set`. Constant validation targets are rejected.
TrainResult train(const FeatureSet& train_set, const FeatureSet& val_set, HeadParams init, const TrainConfig& cfg);

// "epoch,train_mse,val_rmse,val_plcc,val_srcc" rows (no header).
std::string history_csv_rows(const std::vector<EpochRecord>& history);

}  // namespace br
