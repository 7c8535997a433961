// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fedsim.h"
#include "fedsim/config.hpp"
#include "fedsim/report.hpp"

using namespace fedsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kTinyConfig =
    "# tiny run\n"
    "method = fedavg\n"
    "clients = 3\n"
    "rounds = 2\n"
    "samples = 900\n"
    "classes = 3\n"
    "features = 5\n"
    "hidden = 8\n"
    "batch_size = 16\n"
    "learning_rate = 0.05\n"
    "repeats = 2\n"
    "seed = 7\n";

fs::path write_config(const std::string& name, const std::string& text) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << text;
  return p;
}

}  // namespace

TEST_CASE("config defaults follow the documented protocol") {
  ParsedConfig pc = parse_config_text("", "<empty>");
  CHECK(pc.cfg.clients == 20);
  CHECK(pc.cfg.data_ratio == 1.0);
  CHECK(pc.cfg.alpha_label == 0.5);
  CHECK(pc.cfg.local_epochs == 2);
  CHECK(pc.cfg.repeats == 5);
  CHECK(pc.cfg.ft_epochs == 2);
}

TEST_CASE("unknown keys are rejected with the line number and key name") {
  try {
    parse_config_text("method = fedavg\nbananas = 3\n", "conf.cfg");
    CHECK(false);
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("conf.cfg:2") != std::string::npos);
    CHECK(msg.find("bananas") != std::string::npos);
  }
}

TEST_CASE("unknown methods are rejected by name") {
  try {
    parse_config_text("method = gossipnet\n", "conf.cfg");
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("gossipnet") != std::string::npos);
  }
}

TEST_CASE("config snapshot is canonical and self-describing") {
  ParsedConfig pc = parse_config_text(kTinyConfig, "tiny.cfg");
  std::string snap = config_snapshot(pc);
  CHECK(snap.find("schema 1") != std::string::npos);
  CHECK(snap.find(tool_version()) != std::string::npos);
  CHECK(snap.find("method = fedavg") != std::string::npos);
  CHECK(snap.find("alpha_label = 0.5") != std::string::npos);
  // re-parsing the snapshot body reproduces the same resolved config
  std::string body;
  std::istringstream lines(snap);
  std::string line;
  while (std::getline(lines, line))
    if (!line.empty() && line[0] != '#') body += line + "\n";
  ParsedConfig again = parse_config_text(body, "snapshot");
  CHECK(config_snapshot(again) == snap);
}

TEST_CASE("sweep axis validation and grid warnings") {
  CHECK_THROWS_AS(parse_sweep_spec("gpus", "1,2"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec("clients", ""), ConfigError);
  SweepSpec on_grid = parse_sweep_spec("alpha_label", "0.1,5.0");
  std::vector<std::string> warnings;
  check_sweep_grid(on_grid, warnings);
  CHECK(warnings.empty());
  SweepSpec off_grid = parse_sweep_spec("alpha_label", "0.1,2.5");
  check_sweep_grid(off_grid, warnings);
  CHECK(warnings.size() == 1);
}

TEST_CASE("cmd_run writes a self-describing, byte-stable results directory") {
  ParsedConfig pc = parse_config_text(kTinyConfig, "tiny.cfg");
  fs::path dir1 = fresh_dir("fedsim_run_a");
  fs::path dir2 = fresh_dir("fedsim_run_b");
  RunSummary s1 = cmd_run(pc, dir1.string());
  RunSummary s2 = cmd_run(pc, dir2.string());
  (void)s1;
  (void)s2;
  for (const char* f : {"config.snapshot", "rounds.csv", "summary.json", "timings.csv"})
    CHECK(fs::exists(dir1 / f));
  CHECK(slurp(dir1 / "rounds.csv") == slurp(dir2 / "rounds.csv"));
  CHECK(slurp(dir1 / "summary.json") == slurp(dir2 / "summary.json"));
  CHECK(slurp(dir1 / "config.snapshot") == slurp(dir2 / "config.snapshot"));

  // summary carries R entries and versioning
  std::string sj = slurp(dir1 / "summary.json");
  CHECK(sj.find("\"schema_version\": 1") != std::string::npos);
  CHECK(sj.find("\"tool_version\"") != std::string::npos);
  CHECK(sj.find("\"per_repeat\"") != std::string::npos);

  // rounds.csv rows: header + repeats * rounds * clients
  std::istringstream rc(slurp(dir1 / "rounds.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(rc, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1 + 2 * 2 * 3);
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("plotdata recomputes per-round means that match an oracle") {
  ParsedConfig pc = parse_config_text(kTinyConfig, "tiny.cfg");
  fs::path dir = fresh_dir("fedsim_plot");
  RunSummary s = cmd_run(pc, dir.string());
  std::string csv = plotdata_csv(dir.string());

  // oracle: average the in-memory round metrics directly
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "round,method,mean_val_acc");
  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    int round = std::stoi(cell);
    std::getline(ls, cell, ',');
    CHECK(cell == "fedavg");
    std::getline(ls, cell, ',');
    double got = std::stod(cell);
    double sum = 0.0;
    int count = 0;
    for (const RunResult& r : s.runs)
      for (double acc : r.rounds[static_cast<std::size_t>(round)].client_val_acc) {
        sum += acc;
        ++count;
      }
    CHECK(std::abs(got - sum / count) <= 1e-12);
    ++seen;
  }
  CHECK(seen == 2);  // one row per round
  fs::remove_all(dir);
}

TEST_CASE("plotdata rejects directories without results") {
  CHECK_THROWS_AS(plotdata_csv("/nonexistent/fedsim"), ConfigError);
  fs::path dir = fresh_dir("fedsim_empty_results");
  CHECK_THROWS_AS(plotdata_csv(dir.string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("single-value sweep equals cmd_run") {
  ParsedConfig pc = parse_config_text(kTinyConfig, "tiny.cfg");
  fs::path run_dir = fresh_dir("fedsim_single_run");
  fs::path sweep_dir = fresh_dir("fedsim_single_sweep");
  cmd_run(pc, run_dir.string());
  cmd_sweep(pc, parse_sweep_spec("alpha_label", "0.5"), sweep_dir.string());
  fs::path sub = sweep_dir / "fedavg_alpha_label_0.5";
  REQUIRE(fs::exists(sub / "rounds.csv"));
  CHECK(slurp(sub / "rounds.csv") == slurp(run_dir / "rounds.csv"));
  CHECK(slurp(sub / "summary.json") == slurp(run_dir / "summary.json"));
  CHECK(fs::exists(sweep_dir / "combined.csv"));
  fs::remove_all(run_dir);
  fs::remove_all(sweep_dir);
}

TEST_CASE("learning-rate sweep records the grid and picks the validation best") {
  std::string text = kTinyConfig;
  ParsedConfig pc = parse_config_text(text, "tiny.cfg");
  pc.cfg.repeats = 1;
  fs::path dir = fresh_dir("fedsim_lr_sweep");
  cmd_sweep(pc, parse_sweep_spec("learning_rate", "0.0001,0.05"), dir.string());
  REQUIRE(fs::exists(dir / "tuning.csv"));
  std::istringstream in(slurp(dir / "tuning.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "method,learning_rate,final_val_acc_mean,selected");
  int rows = 0, selected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    if (line.find(",yes") != std::string::npos) ++selected;
  }
  CHECK(rows == 2);
  CHECK(selected == 1);
  fs::remove_all(dir);
}

TEST_CASE("multi-method sweep builds the rank table") {
  std::string text = std::string(kTinyConfig);
  text.replace(text.find("method = fedavg"), 15, "method = fedavg,local_only");
  ParsedConfig pc = parse_config_text(text, "tiny.cfg");
  pc.cfg.repeats = 1;
  pc.cfg.rounds = 1;
  fs::path dir = fresh_dir("fedsim_multi_sweep");
  cmd_sweep(pc, parse_sweep_spec("alpha_label", "0.5,5.0"), dir.string());
  std::string combined = slurp(dir / "combined.csv");
  std::istringstream in(combined);
  std::string header;
  std::getline(in, header);
  CHECK(header == "method,alpha_label=0.5,alpha_label=5,average_rank");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  CHECK(combined.find("fedavg") != std::string::npos);
  CHECK(combined.find("local_only") != std::string::npos);
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// C API surface
// ---------------------------------------------------------------------------

TEST_CASE("c api: version and status names") {
  CHECK(std::string(fedsim_version()) == tool_version());
  CHECK(std::string(fedsim_status_name(FEDSIM_OK)) == "ok");
  CHECK(std::string(fedsim_status_name(FEDSIM_ERR_CONFIG)) == "config-error");
}

TEST_CASE("c api: load, set, run, rerun byte-identical") {
  fs::path cfg_path = write_config("fedsim_capi.cfg", kTinyConfig);
  char err[512] = {0};
  fedsim_config_t* cfg = nullptr;
  REQUIRE(fedsim_config_load(cfg_path.string().c_str(), &cfg, err, sizeof err) ==
          FEDSIM_OK);
  REQUIRE(cfg != nullptr);
  CHECK(fedsim_config_set(cfg, "repeats", "1", err, sizeof err) == FEDSIM_OK);
  CHECK(fedsim_config_set(cfg, "bogus_key", "1", err, sizeof err) ==
        FEDSIM_ERR_CONFIG);
  CHECK(std::string(err).find("bogus_key") != std::string::npos);

  fs::path dir1 = fresh_dir("fedsim_capi_a");
  fs::path dir2 = fresh_dir("fedsim_capi_b");
  REQUIRE(fedsim_run(cfg, dir1.string().c_str(), err, sizeof err) == FEDSIM_OK);
  REQUIRE(fedsim_run(cfg, dir2.string().c_str(), err, sizeof err) == FEDSIM_OK);
  CHECK(slurp(dir1 / "rounds.csv") == slurp(dir2 / "rounds.csv"));
  CHECK(slurp(dir1 / "summary.json") == slurp(dir2 / "summary.json"));
  fedsim_config_free(cfg);
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  fs::remove(cfg_path);
}

TEST_CASE("c api: malformed configs return line-anchored errors") {
  fs::path bad = write_config("fedsim_bad.cfg", "method = fedavg\nwibble = 1\n");
  char err[512] = {0};
  fedsim_config_t* cfg = nullptr;
  CHECK(fedsim_config_load(bad.string().c_str(), &cfg, err, sizeof err) ==
        FEDSIM_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(err).find(":2") != std::string::npos);
  CHECK(std::string(err).find("wibble") != std::string::npos);
  fs::remove(bad);
}

TEST_CASE("c api: traffic report for bundled and file-based architectures") {
  char err[512] = {0};
  char* csv = nullptr;
  REQUIRE(fedsim_traffic_report("mnist", 0, &csv, err, sizeof err) == FEDSIM_OK);
  std::string report(csv);
  fedsim_string_free(csv);
  CHECK(report.find("fedavg,mnist,2399764,1.000,yes") != std::string::npos);
  CHECK(report.find("lgfedavg,mnist,2580,0.001,yes") != std::string::npos);

  CHECK(fedsim_traffic_report("atlantis", 0, &csv, err, sizeof err) ==
        FEDSIM_ERR_FORMAT);

  // a custom 2-layer spec: fedavg row is twice the declared total
  fs::path arch = write_config("fedsim_custom.arch",
                               "name custom\nlayer Linear 100 BODY\nlayer Linear 10 HEAD\n");
  REQUIRE(fedsim_traffic_report(arch.string().c_str(), 1, &csv, err, sizeof err) ==
          FEDSIM_OK);
  report = csv;
  fedsim_string_free(csv);
  CHECK(report.find("fedavg,custom,220,1.000,-,1760") != std::string::npos);
  fs::remove(arch);
}

TEST_CASE("c api: plotdata matches the library output") {
  ParsedConfig pc = parse_config_text(kTinyConfig, "tiny.cfg");
  fs::path dir = fresh_dir("fedsim_capi_plot");
  cmd_run(pc, dir.string());
  char err[512] = {0};
  char* csv = nullptr;
  REQUIRE(fedsim_plotdata(dir.string().c_str(), &csv, err, sizeof err) == FEDSIM_OK);
  CHECK(std::string(csv) == plotdata_csv(dir.string()));
  fedsim_string_free(csv);
  fs::remove_all(dir);
}

TEST_CASE("shipped architecture spec files match the built-in registry") {
  for (const std::string& name : builtin_arch_names()) {
    ArchSpec from_file = ArchSpec::load(std::string(FEDSIM_SPECS_DIR) + "/" + name + ".arch");
    const ArchSpec& builtin = builtin_arch(name);
    CHECK(from_file.name == builtin.name);
    REQUIRE(from_file.layers.size() == builtin.layers.size());
    for (std::size_t i = 0; i < builtin.layers.size(); ++i) {
      CHECK(from_file.layers[i].kind == builtin.layers[i].kind);
      CHECK(from_file.layers[i].trainable_params == builtin.layers[i].trainable_params);
      CHECK(from_file.layers[i].tag == builtin.layers[i].tag);
    }
  }
}

TEST_CASE("a failing run persists partial results with the abort diagnostic") {
  // 40 clients cannot partition 38 usable train samples: every repeat fails,
  // and the run directory must still land with the abort recorded
  std::string text =
      "method = fedavg\n"
      "clients = 40\n"
      "rounds = 1\n"
      "repeats = 2\n"
      "samples = 48\n"
      "classes = 3\n"
      "features = 4\n"
      "hidden = 4\n"
      "batch_size = 8\n"
      "seed = 424242\n";
  ParsedConfig pc = parse_config_text(text, "partial.cfg");
  fs::path dir = fresh_dir("fedsim_partial");
  CHECK_THROWS_AS(cmd_run(pc, dir.string()), PartitionFailure);
  REQUIRE(fs::exists(dir / "summary.json"));
  REQUIRE(fs::exists(dir / "config.snapshot"));
  std::string sj = slurp(dir / "summary.json");
  CHECK(sj.find("\"aborted\": true") != std::string::npos);
  CHECK(sj.find("repeat 0 failed") != std::string::npos);
  fs::remove_all(dir);
}
