#include "br/commands.hpp"

#include <cstdlib>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "br/backbone.hpp"
#include "br/blob.hpp"
#include "br/csv.hpp"
#include "br/error.hpp"
#include "br/imageprep.hpp"
#include "br/reghead.hpp"
#include "br/rng.hpp"

namespace br::cli {
namespace {

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw Error(what + " not found: " + p.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory: " + dir.string());
}

KvConfig read_manifest(const fs::path& dir) {
  const fs::path m = dir / "manifest.txt";
  if (!fs::exists(m)) return {};
  return KvConfig::load(m);
}

fs::path resolve_image_root(const fs::path& dataset_dir, const RunConfig& cfg,
                            const std::optional<fs::path>& image_root) {
  if (image_root) return *image_root;
  if (const auto v = cfg.kv.find("data.image_root")) return *v;
  if (const auto v = read_manifest(dataset_dir).find("source_dir")) return *v;
  return dataset_dir;
}

fs::path image_path(const data::ItemRecord& r, const fs::path& root) {
  const auto resolved = r.resolved_image ? r.resolved_image : data::main_image(r);
  if (!resolved) throw Error("record " + r.id + " has no MAIN image");
  const std::string& ref = *resolved;
  if (ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0) {
    throw Error("record " + r.id + ": image " + ref + " is a remote URL; fetch images locally first");
  }
  const fs::path p(ref);
  return p.is_absolute() ? p : root / p;
}

std::vector<data::ItemRecord> load_split(const fs::path& file) {
  require_exists(file, "dataset file");
  auto res = data::ingest_jsonl(file);
  if (!res.rejects.empty()) {
    throw Error(file.string() + ":" + std::to_string(res.rejects.front().line) + ": " + res.rejects.front().reason);
  }
  return std::move(res.records);
}

FeatureSet featurize(const Backbone& backbone, const ModelConfig& model, const std::vector<data::ItemRecord>& recs,
                     const fs::path& root, const std::string& label) {
  spdlog::info("encoding {} {} samples", recs.size(), label);
  return extract_features(backbone, model, recs.size(), [&](std::size_t i) {
    const auto& r = recs[i];
    return SampleInput{image::load_image(image_path(r, root)), r.metadata(), r.average_rating};
  });
}

void configure_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_color_mt("boundreg");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("BR_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

}  // namespace

KvConfig RunConfig::defaults() {
  KvConfig kv;
  kv.set("seed", "0");
  kv.set("prompt.char_limit", "100");
  kv.set("prompt.max_text_tokens", "1024");
  kv.set("image.resolution", "384");
  kv.set("image.patch", "16");
  kv.set("image.shuffle", "3");
  kv.set("image.mean", "0.5,0.5,0.5");
  kv.set("image.std", "0.5,0.5,0.5");
  kv.set("backbone.d_model", "576");
  kv.set("backbone.n_mix_layers", "2");
  kv.set("train.peak_lr", "0.0004");
  kv.set("train.warmup_frac", "0.03");
  kv.set("train.batch_size", "64");
  kv.set("train.max_epochs", "5");
  kv.set("train.patience", "1");
  kv.set("train.weight_decay", "0.01");
  kv.set("train.dropout", "0.1");
  kv.set("sampling.k", "1000");
  kv.set("sampling.min_reviews", "10");
  kv.set("sampling.holdout", "100");
  kv.set("ces.p_tgt", "1e9");
  kv.set("ces.f_tgt", "2e10");
  kv.set("ces.bonus_slope", "0.05");
  kv.set("ces.bonus_cap", "1.10");
  kv.set("ces.penalty_slope", "2.0");
  return kv;
}

RunConfig RunConfig::build(const std::optional<fs::path>& config_file, const KvConfig& overrides) {
  configure_logging();
  RunConfig rc;
  rc.kv = defaults();
  std::set<std::string> known;
  for (const auto& [k, v] : rc.kv.values()) known.insert(k);
  known.insert({"backbone.seed", "data.image_root", "arch"});
  KvConfig user;
  if (config_file) user = KvConfig::load(*config_file);
  user.merge(overrides);
  for (const auto& [k, v] : user.values()) {
    if (!known.count(k)) throw Error("unknown config key '" + k + "'");
  }
  rc.kv.merge(user);

  rc.seed = rc.kv.get_u64("seed", 0);
  if (!rc.kv.has("backbone.seed")) rc.kv.set("backbone.seed", std::to_string(derive_seed(rc.seed, "backbone")));
  rc.model = ModelConfig::from_kv(rc.kv, "");

  rc.train.peak_lr = rc.kv.get_double("train.peak_lr", rc.train.peak_lr);
  rc.train.warmup_frac = rc.kv.get_double("train.warmup_frac", rc.train.warmup_frac);
  rc.train.batch_size = rc.kv.get_size("train.batch_size", rc.train.batch_size);
  rc.train.max_epochs = rc.kv.get_size("train.max_epochs", rc.train.max_epochs);
  rc.train.patience = rc.kv.get_size("train.patience", rc.train.patience);
  rc.train.weight_decay = rc.kv.get_double("train.weight_decay", rc.train.weight_decay);
  rc.train.seed = derive_seed(rc.seed, "train");
  rc.dropout = rc.kv.get_double("train.dropout", rc.dropout);

  rc.sampling.k = rc.kv.get_size("sampling.k", rc.sampling.k);
  rc.sampling.min_reviews = rc.kv.get_u64("sampling.min_reviews", rc.sampling.min_reviews);
  rc.sampling.holdout_n = rc.kv.get_size("sampling.holdout", rc.sampling.holdout_n);
  rc.sampling.seed = derive_seed(rc.seed, "split");
  rc.sampling.validate();

  rc.ces = eff::CESConfig::from_kv(rc.kv);
  return rc;
}

std::string RunConfig::stamp() const {
  return "# config_hash=" + hex64(hash()) + " seed=" + std::to_string(seed) + "\n";
}

PrepareSummary cmd_prepare(const fs::path& data_in, const RunConfig& cfg, const fs::path& out_dir) {
  require_exists(data_in, "input");
  ensure_dir(out_dir);
  PrepareSummary s;
  data::IngestResult ing = data::ingest_jsonl(data_in);
  s.ingested = ing.records.size();
  s.rejected = ing.rejects.size();
  auto kept = data::filter_items(std::move(ing.records), cfg.sampling);
  s.filtered = kept.size();
  auto sampled = data::stratified_sample(std::move(kept), cfg.sampling);
  s.sampled = sampled.size();
  auto [train, val] = data::split_holdout(std::move(sampled), cfg.sampling);
  s.train = train.size();
  s.validation = val.size();

  write_text_file(out_dir / "train.jsonl", data::to_jsonl(train));
  write_text_file(out_dir / "val.jsonl", data::to_jsonl(val));
  write_text_file(out_dir / "rejects.csv", cfg.stamp() + "line,reason\n" + data::rejects_csv_rows(ing.rejects));

  KvConfig manifest;
  manifest.set("config_hash", hex64(cfg.hash()));
  manifest.set("seed", std::to_string(cfg.seed));
  manifest.set("source_dir", fs::absolute(data_in).parent_path().lexically_normal().string());
  manifest.set("ingested", std::to_string(s.ingested));
  manifest.set("rejected", std::to_string(s.rejected));
  manifest.set("filtered", std::to_string(s.filtered));
  manifest.set("sampled", std::to_string(s.sampled));
  manifest.set("train", std::to_string(s.train));
  manifest.set("validation", std::to_string(s.validation));
  write_text_file(out_dir / "manifest.txt", manifest.canonical());
  spdlog::info("prepare: {} ingested, {} rejected, {} pass filters, {} sampled, {} train / {} validation",
               s.ingested, s.rejected, s.filtered, s.sampled, s.train, s.validation);
  return s;
}

TrainResult cmd_train(const fs::path& dataset, const RunConfig& cfg, const fs::path& out_dir,
                      const std::optional<fs::path>& image_root) {
  require_exists(dataset, "dataset");
  if (cfg.train.max_epochs == 0) throw Error("nothing to train");
  cfg.train.validate();
  const auto train_recs = load_split(dataset / "train.jsonl");
  const auto val_recs = load_split(dataset / "val.jsonl");
  const fs::path root = resolve_image_root(dataset, cfg, image_root);
  ensure_dir(out_dir);

  const Backbone backbone(cfg.model.backbone);
  const std::uint64_t frozen = backbone.fingerprint();
  const FeatureSet train_fs = featurize(backbone, cfg.model, train_recs, root, "train");
  const FeatureSet val_fs = featurize(backbone, cfg.model, val_recs, root, "validation");

  HeadParams init = HeadParams::random(cfg.model.backbone.d_model, derive_seed(cfg.seed, "head.init"), cfg.dropout);
  TrainResult res = train(train_fs, val_fs, std::move(init), cfg.train);
  if (backbone.fingerprint() != frozen) throw Error("backbone weights changed during training");
  for (const auto& r : res.history) {
    spdlog::info("epoch {}: train_mse={:.5f} val_rmse={:.5f} val_plcc={:.5f} val_srcc={:.5f}", r.epoch, r.train_mse,
                 r.val_rmse, r.val_plcc, r.val_srcc);
  }

  Blob ckpt = res.best.to_blob();
  ckpt.meta["config_hash"] = hex64(cfg.hash());
  ckpt.meta["seed"] = std::to_string(cfg.seed);
  ckpt.meta["epoch"] = std::to_string(res.best_epoch);
  ckpt.meta["backbone_fingerprint"] = hex64(frozen);
  ckpt.meta["val_rmse"] = format_double(res.best_report.rmse);
  ckpt.meta["val_plcc"] = format_double(res.best_report.plcc);
  ckpt.meta["val_srcc"] = format_double(res.best_report.srcc);
  const KvConfig model_kv = cfg.model.to_kv();
  for (const auto& [k, v] : model_kv.values()) ckpt.meta[k] = v;
  ckpt.save(out_dir / "checkpoint.bin");
  write_text_file(out_dir / "history.csv",
                  cfg.stamp() + "epoch,train_mse,val_rmse,val_plcc,val_srcc\n" + history_csv_rows(res.history));
  spdlog::info("best epoch {} (val PLCC {:.5f}); checkpoint written to {}", res.best_epoch, res.best_report.plcc,
               (out_dir / "checkpoint.bin").string());
  return res;
}

metrics::EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& dataset, const RunConfig& cfg,
                             const fs::path& out_dir, const std::optional<fs::path>& image_root) {
  require_exists(checkpoint, "checkpoint");
  require_exists(dataset, "dataset");
  const Blob blob = Blob::load(checkpoint);
  const HeadParams head = HeadParams::from_blob(blob);
  KvConfig model_kv;
  for (const auto& [k, v] : blob.meta) {
    if (k.rfind("model.", 0) == 0) model_kv.set(k, v);
  }
  const ModelConfig model = ModelConfig::from_kv(model_kv);

  const bool is_dir = fs::is_directory(dataset);
  const fs::path file = is_dir ? dataset / "val.jsonl" : dataset;
  const fs::path dir = is_dir ? dataset : dataset.parent_path();
  const auto recs = load_split(file);
  if (recs.size() < 2) throw Error("n ≥ 2 required");
  ensure_dir(out_dir);

  const Backbone backbone(model.backbone);
  if (const auto fp = blob.get("backbone_fingerprint"); fp && *fp != hex64(backbone.fingerprint())) {
    throw Error("checkpoint was trained on a different backbone");
  }
  const FeatureSet fs_ = featurize(backbone, model, recs, resolve_image_root(dir, cfg, image_root), "evaluation");
  const std::vector<double> preds = predict(head, fs_);
  const metrics::EvalReport rep = metrics::evaluate(preds, fs_.targets);
  const auto grid = metrics::density_grid(preds, fs_.targets);

  write_text_file(out_dir / "eval_report.csv", cfg.stamp() + metrics::EvalReport::csv_header() + rep.csv_row());
  write_text_file(out_dir / "eval_report.txt", "config_hash: " + hex64(cfg.hash()) + "\nseed: " +
                                                   std::to_string(cfg.seed) + "\n" + rep.text_block());
  write_text_file(out_dir / "density_grid.csv", cfg.stamp() + metrics::density_csv(grid));
  return rep;
}

eff::CesReport cmd_ces(const CesRequest& req, const RunConfig& cfg, const std::optional<fs::path>& out_dir) {
  require_exists(req.arch, "arch spec");
  const eff::ArchSpec spec = eff::ArchSpec::load(req.arch);
  eff::ResourceProfile profile;
  profile.params = req.params ? *req.params : static_cast<double>(eff::param_count(spec).total);
  profile.flops = req.flops ? *req.flops : eff::max_flops(spec, req.resolution, req.char_limit).total;
  const eff::CesReport rep = eff::ces_report(req.plcc, profile, cfg.ces);
  if (out_dir) {
    ensure_dir(*out_dir);
    write_text_file(*out_dir / "ces_report.csv", cfg.stamp() + eff::CesReport::csv_header() + rep.csv_row());
  }
  return rep;
}

std::string cmd_flops(const fs::path& arch, std::size_t resolution, std::size_t char_limit, const RunConfig& cfg,
                      const std::optional<fs::path>& out_dir) {
  require_exists(arch, "arch spec");
  const eff::ArchSpec spec = eff::ArchSpec::load(arch);
  const auto pc = eff::param_count(spec);
  const std::size_t vt = eff::visual_tokens_for_resolution(spec, resolution);
  const std::size_t tt = eff::text_tokens_for_budget(spec, char_limit);
  const auto f = eff::flop_estimate(spec, vt, tt);
  std::string csv = "resolution,char_limit,visual_tokens,text_tokens,vision,connector,decoder,head,total,params\n";
  csv += csv_line({std::to_string(resolution), std::to_string(char_limit), std::to_string(vt), std::to_string(tt),
                   format_double(f.vision), format_double(f.connector), format_double(f.decoder),
                   format_double(f.head), format_double(f.total), std::to_string(pc.total)});
  if (out_dir) {
    ensure_dir(*out_dir);
    write_text_file(*out_dir / "flops.csv", cfg.stamp() + csv);
  }
  return csv;
}

int run(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Bounded-compute multimodal rating regression: data preparation, training, evaluation and "
               "efficiency scoring"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "Key-value config file");
  app.add_option("--seed", seed, "Root seed (overrides the config)");
  app.add_option("--out", out, "Output directory");
  app.add_option("--set", sets, "Config override KEY=VALUE (repeatable)");

  std::string data_path, checkpoint_path, images;
  std::optional<std::size_t> resolution, char_limit, k, holdout, max_epochs;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--resolution", resolution, "Image resolution");
    sub->add_option("--char-limit", char_limit, "Per-field character budget");
  };

  auto* prepare = app.add_subcommand("prepare", "Filter, stratify and split a JSON-lines metadata file");
  prepare->add_option("--data", data_path, "Input JSONL")->required();
  prepare->add_option("--k", k, "Per-tail sample size per category");
  prepare->add_option("--holdout", holdout, "Validation records");

  auto* train_cmd = app.add_subcommand("train", "Train the regression head on a prepared dataset");
  train_cmd->add_option("--data", data_path, "Prepared dataset directory")->required();
  train_cmd->add_option("--images", images, "Root for relative image paths");
  train_cmd->add_option("--epochs", max_epochs, "Maximum epochs");
  add_overrides(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data_path, "Prepared dataset directory or JSONL file")->required();
  eval_cmd->add_option("--images", images, "Root for relative image paths");

  double plcc = 0.0;
  std::string arch = "configs/smolvlm2-256m.arch";
  std::optional<double> flops, params;
  auto* ces_cmd = app.add_subcommand("ces", "Comprehensive efficiency score for a PLCC and architecture");
  ces_cmd->add_option("--plcc", plcc, "Validation or test PLCC")->required();
  ces_cmd->add_option("--arch", arch, "Architecture spec file");
  ces_cmd->add_option("--flops", flops, "Use this FLOP count instead of the analytic estimate");
  ces_cmd->add_option("--params", params, "Use this parameter count instead of the analytic count");
  add_overrides(ces_cmd);

  auto* flops_cmd = app.add_subcommand("flops", "Analytic FLOP and parameter counts for an architecture");
  flops_cmd->add_option("--arch", arch, "Architecture spec file");
  add_overrides(flops_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    KvConfig overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error("--set expects KEY=VALUE, got '" + s + "'");
      overrides.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) overrides.set("seed", std::to_string(*seed));
    // ces and flops size the deployed architecture, not the toy image pipeline.
    const bool arch_only = *ces_cmd || *flops_cmd;
    if (resolution && !arch_only) overrides.set("image.resolution", std::to_string(*resolution));
    if (char_limit) overrides.set("prompt.char_limit", std::to_string(*char_limit));
    if (k) overrides.set("sampling.k", std::to_string(*k));
    if (holdout) overrides.set("sampling.holdout", std::to_string(*holdout));
    if (max_epochs) overrides.set("train.max_epochs", std::to_string(*max_epochs));
    std::optional<fs::path> cfg_file;
    if (config_path) {
      require_exists(*config_path, "config file");
      cfg_file = fs::path(*config_path);
    }
    const std::optional<fs::path> image_root = images.empty() ? std::nullopt : std::optional<fs::path>(images);

    if (*prepare) {
      const RunConfig cfg = RunConfig::build(cfg_file, overrides);
      cmd_prepare(data_path, cfg, out);
    } else if (*train_cmd) {
      const RunConfig cfg = RunConfig::build(cfg_file, overrides);
      cmd_train(data_path, cfg, out, image_root);
    } else if (*eval_cmd) {
      const RunConfig cfg = RunConfig::build(cfg_file, overrides);
      const auto rep = cmd_eval(checkpoint_path, data_path, cfg, out, image_root);
      std::cout << rep.text_block();
    } else if (*ces_cmd) {
      const RunConfig cfg = RunConfig::build(cfg_file, overrides);
      const bool write = app.get_option("--out")->count() > 0;
      const auto rep = cmd_ces({plcc, arch, cfg.model.prompt.char_limit, resolution.value_or(cfg.model.image.resolution), flops, params},
                               cfg, write ? std::optional<fs::path>(out) : std::nullopt);
      std::cout << eff::CesReport::csv_header() << rep.csv_row();
    } else if (*flops_cmd) {
      const RunConfig cfg = RunConfig::build(cfg_file, overrides);
      const bool write = app.get_option("--out")->count() > 0;
      std::cout << cmd_flops(arch, resolution.value_or(cfg.model.image.resolution), cfg.model.prompt.char_limit, cfg,
                             write ? std::optional<fs::path>(out) : std::nullopt);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

}  // namespace br::cli
