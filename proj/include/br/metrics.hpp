#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace br::metrics {

struct EvalReport {
  double rmse = 0.0;
  double plcc = 0.0;
  double srcc = 0.0;
  std::size_t n = 0;

  // "n,rmse,plcc,srcc" header line and value line.
  static std::string csv_header();
  std::string csv_row() const;
  // One "key: value" per line.
  std::string text_block() const;
};

double mse(std::span<const double> preds, std::span<const double> targets);
double rmse(std::span<const double> preds, std::span<const double> targets);

// Pearson correlation with population (1/n) moments.
double plcc(std::span<const double> preds, std::span<const double> targets);

// 1-based average ranks; tied values share the mean of their rank span.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of average ranks.
double srcc(std::span<const double> preds, std::span<const double> targets);

// Requires n >= 2 and non-constant inputs.
EvalReport evaluate(std::span<const double> preds, std::span<const double> targets);

struct DensityCell {
  int pred_tenths = 0;    // pred bin * 10, in [10, 50]
  int target_tenths = 0;  // target bin * 10, in [10, 50]
  std::size_t count = 0;
};

// Both axes rounded half-up to one decimal on the 41 x 41 grid over [1, 5].
// Only non-empty cells are returned, ordered by (pred, target).
std::vector<DensityCell> density_grid(std::span<const double> preds, std::span<const double> targets);

// Half-up rounding to tenths: 3.05 -> 31, 3.04 -> 30.
int round_to_tenths(double v);

// "pred_bin,target_bin,count" followed by one line per cell.
std::string density_csv(const std::vector<DensityCell>& cells);

}  // namespace br::metrics
