#include <doctest.h>

#include <fstream>
#include <set>

#include "br/blob.hpp"
#include "br/commands.hpp"
#include "br/csv.hpp"
#include "br/error.hpp"
#include "fixtures.hpp"

using namespace br;
using namespace br::cli;

namespace {

KvConfig small_overrides() {
  KvConfig kv;
  kv.set("image.resolution", "48");
  kv.set("backbone.d_model", "16");
  kv.set("prompt.char_limit", "30");
  kv.set("sampling.holdout", "10");
  kv.set("train.batch_size", "8");
  kv.set("train.peak_lr", "0.01");
  kv.set("seed", "5");
  return kv;
}

fs::path arch_file() { return fs::path(BR_SOURCE_DIR) / "configs/smolvlm2-256m.arch"; }

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

std::set<std::string> listing(const fs::path& dir) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) out.insert(fs::relative(e.path(), dir).string());
  return out;
}

}  // namespace

TEST_CASE("run config layering") {
  const auto dir = fixtures::scratch_dir("cli_cfg");
  write_text_file(dir / "a.conf", "seed = 3\n[train]\nmax_epochs = 2\n");
  KvConfig flags;
  flags.set("train.max_epochs", "4");
  const auto cfg = RunConfig::build(dir / "a.conf", flags);
  CHECK(cfg.seed == 3);
  CHECK(cfg.train.max_epochs == 4);
  CHECK(cfg.kv.has("backbone.seed"));
  CHECK(cfg.stamp().rfind("# config_hash=", 0) == 0);

  const auto same = RunConfig::build(dir / "a.conf", flags);
  CHECK(same.hash() == cfg.hash());
  flags.set("seed", "4");
  CHECK(RunConfig::build(dir / "a.conf", flags).hash() != cfg.hash());

  write_text_file(dir / "typo.conf", "[train]\nmax_epoch = 2\n");
  CHECK_THROWS_WITH_AS(RunConfig::build(dir / "typo.conf", {}), doctest::Contains("max_epoch"), Error);
}

TEST_CASE("prepare writes deterministic outputs") {
  const auto dir = fixtures::scratch_dir("cli_prepare");
  const auto jsonl = fixtures::write_dataset(dir / "src", fixtures::learnable_items(40, 1));
  const auto cfg = RunConfig::build(std::nullopt, small_overrides());
  const auto s = cmd_prepare(jsonl, cfg, dir / "a");
  CHECK(s.ingested == 40);
  CHECK(s.train == 30);
  CHECK(s.validation == 10);
  cmd_prepare(jsonl, cfg, dir / "b");
  for (const char* f : {"train.jsonl", "val.jsonl", "rejects.csv", "manifest.txt"}) {
    CHECK(read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f));
  }
  CHECK(listing(dir / "a") == std::set<std::string>{"train.jsonl", "val.jsonl", "rejects.csv", "manifest.txt"});
  CHECK(first_line(dir / "a/rejects.csv") == cfg.stamp().substr(0, cfg.stamp().size() - 1));
  CHECK(read_text_file(dir / "a/manifest.txt").find("config_hash=") != std::string::npos);
}

TEST_CASE("prepare names a missing input") {
  const auto cfg = RunConfig::build(std::nullopt, {});
  CHECK_THROWS_WITH_AS(cmd_prepare("/nonexistent/items.jsonl", cfg, fixtures::scratch_dir("cli_missing")),
                       doctest::Contains("/nonexistent/items.jsonl"), Error);
}

TEST_CASE("train and eval agree on the validation metrics") {
  const auto dir = fixtures::scratch_dir("cli_train");
  const auto jsonl = fixtures::write_dataset(dir / "src", fixtures::learnable_items(60, 2));
  const auto cfg = RunConfig::build(std::nullopt, small_overrides());
  cmd_prepare(jsonl, cfg, dir / "data");
  const auto res = cmd_train(dir / "data", cfg, dir / "run");
  CHECK(fs::exists(dir / "run/checkpoint.bin"));
  CHECK(fs::exists(dir / "run/history.csv"));
  const Blob ckpt = Blob::load(dir / "run/checkpoint.bin");
  CHECK(ckpt.require("config_hash") == hex64(cfg.hash()));
  CHECK(ckpt.require("epoch") == std::to_string(res.best_epoch));

  const auto rep = cmd_eval(dir / "run/checkpoint.bin", dir / "data", cfg, dir / "eval");
  CHECK(rep.n == 10);
  CHECK(std::abs(rep.plcc - res.history[res.best_epoch - 1].val_plcc) <= 1e-9);
  CHECK(std::abs(rep.rmse - res.history[res.best_epoch - 1].val_rmse) <= 1e-9);
  CHECK(listing(dir / "eval") == std::set<std::string>{"eval_report.csv", "eval_report.txt", "density_grid.csv"});
  CHECK(first_line(dir / "eval/density_grid.csv").rfind("# config_hash=", 0) == 0);
  CHECK(read_text_file(dir / "eval/eval_report.txt").find("config_hash: ") != std::string::npos);
}

TEST_CASE("train and eval errors") {
  const auto dir = fixtures::scratch_dir("cli_errors");
  auto items = fixtures::learnable_items(30, 3);
  const auto jsonl = fixtures::write_dataset(dir / "src", items);
  auto ov = small_overrides();
  const auto cfg = RunConfig::build(std::nullopt, ov);
  cmd_prepare(jsonl, cfg, dir / "data");

  ov.set("train.max_epochs", "0");
  CHECK_THROWS_WITH_AS(cmd_train(dir / "data", RunConfig::build(std::nullopt, ov), dir / "run"),
                       doctest::Contains("nothing to train"), Error);

  ov.set("train.max_epochs", "1");
  const auto cfg1 = RunConfig::build(std::nullopt, ov);
  cmd_train(dir / "data", cfg1, dir / "run");

  // One record, and a set with constant targets.
  write_text_file(dir / "src/one.jsonl", fixtures::item_json(items[0], "images/" + items[0].id + ".ppm") + "\n");
  CHECK_THROWS_WITH_AS(cmd_eval(dir / "run/checkpoint.bin", dir / "src/one.jsonl", cfg1, dir / "e1"),
                       doctest::Contains("n ≥ 2 required"), Error);
  std::string flat;
  for (int i = 0; i < 3; ++i) {
    auto it = items[i];
    it.rating = 4.0;
    flat += fixtures::item_json(it, "images/" + it.id + ".ppm") + "\n";
  }
  write_text_file(dir / "src/flat.jsonl", flat);
  CHECK_THROWS_WITH_AS(cmd_eval(dir / "run/checkpoint.bin", dir / "src/flat.jsonl", cfg1, dir / "e2"),
                       doctest::Contains("zero variance"), Error);

  Blob tampered = Blob::load(dir / "run/checkpoint.bin");
  REQUIRE(tampered.get("backbone_fingerprint"));
  tampered.meta["backbone_fingerprint"] = "0000000000000000";
  tampered.save(dir / "run/tampered.bin");
  CHECK_THROWS_WITH_AS(cmd_eval(dir / "run/tampered.bin", dir / "data", cfg1, dir / "e3"),
                       doctest::Contains("different backbone"), Error);
}

TEST_CASE("ces command") {
  const auto cfg = RunConfig::build(std::nullopt, {});
  CesRequest req;
  req.plcc = 0.39;
  req.arch = arch_file();
  req.flops = 68e9;
  req.params = 228e6;
  const auto dir = fixtures::scratch_dir("cli_ces");
  const auto rep = cmd_ces(req, cfg, dir);
  CHECK(rep.C == doctest::Approx(0.881).epsilon(0.001 / 0.881));
  CHECK(rep.E == doctest::Approx(1.006).epsilon(0.0005));
  CHECK(read_text_file(dir / "ces_report.csv").find("plcc,params,flops,C,E,ces\n") != std::string::npos);

  req.plcc = -0.2;
  CHECK(cmd_ces(req, cfg, std::nullopt).ces == 0.0);

  req.arch = "/nonexistent/x.arch";
  CHECK_THROWS_AS(cmd_ces(req, cfg, std::nullopt), Error);
}

TEST_CASE("command line exit codes") {
  const std::string arch = arch_file().string();
  {
    const char* argv[] = {"boundreg", "ces", "--plcc", "0.5", "--arch", arch.c_str()};
    CHECK(run(6, const_cast<char**>(argv)) == 0);
  }
  {
    const char* argv[] = {"boundreg", "ces", "--plcc", "0.5", "--arch", "/nonexistent/x.arch"};
    CHECK(run(6, const_cast<char**>(argv)) != 0);
  }
  {
    const char* argv[] = {"boundreg", "prepare", "--data", "/nonexistent/in.jsonl", "--out", "/tmp/boundreg_test_nowrite"};
    CHECK(run(6, const_cast<char**>(argv)) != 0);
  }
  {
    const char* argv[] = {"boundreg", "flops", "--arch", arch.c_str(), "--char-limit", "200"};
    CHECK(run(6, const_cast<char**>(argv)) == 0);
  }
  {
    // 512 px is not a multiple of the toy pipeline's shuffle grid; the arch commands must not care.
    const char* argv[] = {"boundreg", "flops", "--arch", arch.c_str(), "--resolution", "512"};
    CHECK(run(6, const_cast<char**>(argv)) == 0);
  }
  {
    const char* argv[] = {"boundreg", "bogus"};
    CHECK(run(2, const_cast<char**>(argv)) != 0);
  }
}
