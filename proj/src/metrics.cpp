#include "br/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "br/csv.hpp"
#include "br/error.hpp"

namespace br::metrics {
namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.empty()) throw Error("empty input");
}

double pearson(std::span<const double> x, std::span<const double> y, const char* zero_msg) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(zero_msg);
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

std::string EvalReport::csv_header() { return "n,rmse,plcc,srcc\n"; }

std::string EvalReport::csv_row() const {
  return csv_line({std::to_string(n), format_double(rmse), format_double(plcc), format_double(srcc)});
}

std::string EvalReport::text_block() const {
  return "n: " + std::to_string(n) + "\nrmse: " + format_double(rmse) + "\nplcc: " + format_double(plcc) +
         "\nsrcc: " + format_double(srcc) + "\n";
}

double mse(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets);
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - targets[i];
    acc += d * d;
  }
  return acc / static_cast<double>(preds.size());
}

double rmse(std::span<const double> preds, std::span<const double> targets) {
  return std::sqrt(mse(preds, targets));
}

double plcc(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets);
  if (preds.size() < 2) throw Error("n ≥ 2 required");
  return pearson(preds, targets, "zero variance");
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) hold ranks i+1..j+1
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double srcc(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets);
  if (preds.size() < 2) throw Error("n ≥ 2 required");
  const auto rp = average_ranks(preds);
  const auto rt = average_ranks(targets);
  return pearson(rp, rt, "zero rank variance");
}

EvalReport evaluate(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets);
  if (preds.size() < 2) throw Error("n ≥ 2 required");
  EvalReport r;
  r.n = preds.size();
  r.rmse = rmse(preds, targets);
  r.plcc = plcc(preds, targets);
  r.srcc = srcc(preds, targets);
  return r;
}

int round_to_tenths(double v) {
  // The small guard absorbs representation error so decimal ties such as 3.05
  // (stored as 3.04999...) round up.
  return static_cast<int>(std::floor(v * 10.0 + 0.5 + 1e-9));
}

std::vector<DensityCell> density_grid(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets);
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool ok = std::isfinite(preds[i]) && std::isfinite(targets[i]) && preds[i] >= 1.0 &&
                    preds[i] <= 5.0 && targets[i] >= 1.0 && targets[i] <= 5.0;
    if (!ok) bad.push_back(i);
  }
  if (!bad.empty()) {
    std::string msg = "value outside [1, 5] at index";
    for (std::size_t k = 0; k < bad.size() && k < 20; ++k) msg += (k ? ", " : " ") + std::to_string(bad[k]);
    if (bad.size() > 20) msg += ", ...";
    throw Error(msg);
  }
  constexpr int kBins = 41;
  std::vector<std::size_t> grid(kBins * kBins, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = round_to_tenths(preds[i]) - 10;
    const int t = round_to_tenths(targets[i]) - 10;
    ++grid[static_cast<std::size_t>(p * kBins + t)];
  }
  std::vector<DensityCell> cells;
  for (int p = 0; p < kBins; ++p) {
    for (int t = 0; t < kBins; ++t) {
      const std::size_t c = grid[static_cast<std::size_t>(p * kBins + t)];
      if (c > 0) cells.push_back({p + 10, t + 10, c});
    }
  }
  return cells;
}

std::string density_csv(const std::vector<DensityCell>& cells) {
  std::string out = "pred_bin,target_bin,count\n";
  for (const auto& c : cells) {
    out += csv_line({format_fixed(c.pred_tenths / 10.0, 1), format_fixed(c.target_tenths / 10.0, 1),
                     std::to_string(c.count)});
  }
  return out;
}

}  // namespace br::metrics
