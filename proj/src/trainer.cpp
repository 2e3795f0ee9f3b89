#include "br/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "br/csv.hpp"
#include "br/error.hpp"

namespace br {
namespace {

template <typename Fn>
void for_each_tensor(HeadParams& p, const HeadGrads& g, OptimizerState& s, Fn&& fn) {
  fn(std::span<double>(p.w1), std::span<const double>(g.w1), std::span<double>(s.m.w1), std::span<double>(s.v.w1), true);
  fn(std::span<double>(p.b1), std::span<const double>(g.b1), std::span<double>(s.m.b1), std::span<double>(s.v.b1), false);
  fn(std::span<double>(p.w2), std::span<const double>(g.w2), std::span<double>(s.m.w2), std::span<double>(s.v.w2), true);
  fn(std::span<double>(&p.b2, 1), std::span<const double>(&g.b2, 1), std::span<double>(&s.m.b2, 1),
     std::span<double>(&s.v.b2, 1), false);
}

void accumulate(HeadGrads& acc, const HeadGrads& g) {
  for (std::size_t i = 0; i < acc.w1.size(); ++i) acc.w1[i] += g.w1[i];
  for (std::size_t i = 0; i < acc.b1.size(); ++i) acc.b1[i] += g.b1[i];
  for (std::size_t i = 0; i < acc.w2.size(); ++i) acc.w2[i] += g.w2[i];
  acc.b2 += g.b2;
}

void scale(HeadGrads& g, double k) {
  for (double& v : g.w1) v *= k;
  for (double& v : g.b1) v *= k;
  for (double& v : g.w2) v *= k;
  g.b2 *= k;
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

void TrainConfig::validate() const {
  if (!(peak_lr > 0.0)) throw Error("invalid train config: peak_lr must be > 0");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw Error("invalid train config: warmup_frac must be in (0, 1)");
  if (batch_size == 0) throw Error("invalid train config: batch_size must be >= 1");
  if (max_epochs == 0) throw Error("nothing to train");
  if (patience == 0) throw Error("invalid train config: patience must be >= 1");
  if (!(weight_decay >= 0.0)) throw Error("invalid train config: weight_decay must be >= 0");
}

OptimizerState OptimizerState::zeros_like(const HeadParams& p) {
  return {HeadParams::zeros(p.dim, p.dropout_p), HeadParams::zeros(p.dim, p.dropout_p), 0};
}

double mse_loss(std::span<const double> preds, std::span<const double> targets) {
  return metrics::mse(preds, targets);
}

std::size_t warmup_steps(std::size_t total_steps, const TrainConfig& cfg) {
  // The epsilon keeps products such as 0.03 * 100 from rounding up a step.
  const auto w = static_cast<std::size_t>(std::ceil(cfg.warmup_frac * static_cast<double>(total_steps) - 1e-9));
  return std::clamp<std::size_t>(w, 1, std::max<std::size_t>(total_steps, 1));
}

double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  if (total_steps == 0) throw Error("total_steps must be >= 1");
  if (step >= total_steps) return 0.0;
  const std::size_t w = warmup_steps(total_steps, cfg);
  if (step < w) return cfg.peak_lr * static_cast<double>(step + 1) / static_cast<double>(w);
  return cfg.peak_lr * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - w);
}

void optimizer_step(HeadParams& params, const HeadGrads& grads, OptimizerState& state, double lr,
                    const TrainConfig& cfg) {
  if (grads.w1.size() != params.w1.size() || grads.b1.size() != params.b1.size() ||
      grads.w2.size() != params.w2.size() || state.m.w1.size() != params.w1.size()) {
    throw Error("optimizer shape mismatch");
  }
  const auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(grads.w1) || !finite(grads.b1) || !finite(grads.w2) || !std::isfinite(grads.b2)) {
    throw Error("diverged");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
  const double decay = 1.0 - lr * cfg.weight_decay;
  for_each_tensor(params, grads, state,
                  [&](std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v,
                      bool is_weight) {
                    for (std::size_t i = 0; i < p.size(); ++i) {
                      if (is_weight) p[i] *= decay;
                      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
                      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
                      const double m_hat = m[i] / bc1;
                      const double v_hat = v[i] / bc2;
                      p[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
                    }
                  });
}

std::vector<double> predict(const HeadParams& params, const FeatureSet& data) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i] = head_forward(data.row(i), params, HeadMode::eval).prediction.rating;
  }
  return out;
}

metrics::EvalReport validation_report(const HeadParams& params, const FeatureSet& val) {
  const std::vector<double> preds = predict(params, val);
  metrics::EvalReport r;
  r.n = val.size();
  r.rmse = metrics::rmse(preds, val.targets);
  if (val.size() >= 2 && !is_constant(preds) && !is_constant(val.targets)) {
    r.plcc = metrics::plcc(preds, val.targets);
    r.srcc = metrics::srcc(preds, val.targets);
  }
  return r;
}

TrainResult train(const FeatureSet& train_set, HeadParams params, const TrainConfig& cfg, const Validator& validate) {
  cfg.validate();
  params.validate();
  if (train_set.size() == 0) throw Error("empty training set");
  if (train_set.dim != params.dim) throw Error("feature dim does not match head dim");

  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.max_epochs;

  SplitMix64 order_rng(derive_seed(cfg.seed, "train.order"));
  SplitMix64 dropout_rng(derive_seed(cfg.seed, "train.dropout"));
  OptimizerState state = OptimizerState::zeros_like(params);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  double best_plcc = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), order_rng);
    double sq_err = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      HeadGrads acc = HeadParams::zeros(params.dim, params.dropout_p);
      for (std::size_t k = start; k < end; ++k) {
        const auto x = train_set.row(order[k]);
        const auto mask = sample_dropout_scale(params.hidden, params.dropout_p, dropout_rng);
        const HeadBackward back = head_backward(x, params, train_set.targets[order[k]], mask);
        sq_err += back.loss;
        accumulate(acc, back.params);
      }
      scale(acc, 1.0 / static_cast<double>(end - start));
      optimizer_step(params, acc, state, lr_at(step, total_steps, cfg), cfg);
      ++step;
    }

    const metrics::EvalReport rep = validate(params);
    EpochRecord rec{epoch, sq_err / static_cast<double>(n), rep.rmse, rep.plcc, rep.srcc};
    result.history.push_back(rec);
    if (rep.plcc > best_plcc || result.best_epoch == 0) {
      best_plcc = rep.plcc;
      result.best = params;
      result.best_epoch = epoch;
      result.best_report = rep;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience || rec.train_mse == 0.0) break;
  }
  return result;
}

TrainResult train(const FeatureSet& train_set, const FeatureSet& val_set, HeadParams init, const TrainConfig& cfg) {
  if (val_set.size() < 2) throw Error("validation set needs at least 2 samples");
  if (is_constant(val_set.targets)) throw Error("degenerate validation set");
  return train(train_set, std::move(init), cfg,
               [&](const HeadParams& p) { return validation_report(p, val_set); });
}

std::string history_csv_rows(const std::vector<EpochRecord>& history) {
  std::string out;
  for (const auto& r : history) {
    out += csv_line({std::to_string(r.epoch), format_double(r.train_mse), format_double(r.val_rmse),
                     format_double(r.val_plcc), format_double(r.val_srcc)});
  }
  return out;
}

}  // namespace br
