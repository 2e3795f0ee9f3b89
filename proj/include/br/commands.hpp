#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "br/datapipe.hpp"
#include "br/effscore.hpp"
#include "br/kvconfig.hpp"
#include "br/metrics.hpp"
#include "br/pipeline.hpp"
#include "br/trainer.hpp"

namespace br::cli {

namespace fs = std::filesystem;

// Effective configuration of one command: built-in defaults, overlaid by the
// config file, overlaid by flags. Every derived seed comes from `seed`.
struct RunConfig {
  KvConfig kv;
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  double dropout = 0.1;
  data::SamplingConfig sampling;
  eff::CESConfig ces;

  static KvConfig defaults();
  static RunConfig build(const std::optional<fs::path>& config_file, const KvConfig& overrides);

  std::uint64_t hash() const { return kv.hash(); }
  // "# config_hash=<hex> seed=<n>\n", the first line of every CSV output.
  std::string stamp() const;
};

struct PrepareSummary {
  std::size_t ingested = 0;
  std::size_t rejected = 0;
  std::size_t filtered = 0;
  std::size_t sampled = 0;
  std::size_t train = 0;
  std::size_t validation = 0;
};

// Writes train.jsonl, val.jsonl, rejects.csv and manifest.txt into out_dir.
PrepareSummary cmd_prepare(const fs::path& data_in, const RunConfig& cfg, const fs::path& out_dir);

// `dataset` is a prepare output directory. Writes checkpoint.bin and history.csv.
TrainResult cmd_train(const fs::path& dataset, const RunConfig& cfg, const fs::path& out_dir,
                      const std::optional<fs::path>& image_root = std::nullopt);

// `dataset` is a JSONL file or a prepare output directory (its val.jsonl).
// Writes eval_report.csv, eval_report.txt and density_grid.csv.
metrics::EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& dataset, const RunConfig& cfg,
                             const fs::path& out_dir, const std::optional<fs::path>& image_root = std::nullopt);

struct CesRequest {
  double plcc = 0.0;
  fs::path arch;
  std::size_t char_limit = 100;
  std::size_t resolution = 384;
  std::optional<double> flops;   // pins the FLOP count instead of the analytic estimate
  std::optional<double> params;  // pins the parameter count
};

// Writes ces_report.csv into out_dir when given.
eff::CesReport cmd_ces(const CesRequest& req, const RunConfig& cfg, const std::optional<fs::path>& out_dir);

// Per-component FLOP table; written to flops.csv when out_dir is given.
std::string cmd_flops(const fs::path& arch, std::size_t resolution, std::size_t char_limit, const RunConfig& cfg,
                      const std::optional<fs::path>& out_dir);

// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace br::cli
