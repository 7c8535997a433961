// SPDX-License-Identifier: Apache-2.0
#include "fedsim/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace fedsim {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path.string() + ": cannot open for writing");
  out << content;
}

}  // namespace

std::string rounds_csv(const RunSummary& summary) {
  std::ostringstream out;
  out << "repeat,round,client_id,val_acc,traffic_params\n";
  for (std::size_t r = 0; r < summary.runs.size(); ++r) {
    for (const RoundMetrics& m : summary.runs[r].rounds) {
      for (std::size_t c = 0; c < m.client_val_acc.size(); ++c) {
        out << r << ',' << m.round << ',' << c << ',' << fmt(m.client_val_acc[c])
            << ',' << m.traffic_params << "\n";
      }
    }
  }
  return out.str();
}

std::string timings_csv(const RunSummary& summary) {
  std::ostringstream out;
  out << "repeat,round,wall_ms\n";
  for (std::size_t r = 0; r < summary.runs.size(); ++r)
    for (const RoundMetrics& m : summary.runs[r].rounds)
      out << r << ',' << m.round << ',' << fmt(m.wall_ms) << "\n";
  return out.str();
}

std::string summary_json(const RunSummary& summary, const ParsedConfig& pc) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["tool_version"] = tool_version();
  j["method"] = summary.config.method;
  j["fine_tune"] = summary.config.fine_tune;
  j["rounds"] = summary.config.rounds;
  j["clients"] = summary.config.clients;
  j["repeats"] = static_cast<int>(summary.runs.size());
  j["master_seed"] = summary.config.seed;
  j["seeds"] = summary.seeds;
  j["aborted"] = summary.aborted;
  if (summary.aborted) j["abort_reason"] = summary.abort_reason;

  nlohmann::ordered_json acc;
  std::vector<double> per_repeat;
  for (const RunResult& r : summary.runs) per_repeat.push_back(r.test_accuracy);
  acc["per_repeat"] = per_repeat;
  acc["mean"] = summary.test_stats.mean;
  acc["std"] = summary.test_stats.std_dev;
  acc["std_undefined"] = summary.test_stats.std_undefined;
  j["test_accuracy"] = acc;

  nlohmann::ordered_json acc0;
  std::vector<double> per_repeat0;
  for (const RunResult& r : summary.runs) per_repeat0.push_back(r.test_accuracy_no_ft);
  acc0["per_repeat"] = per_repeat0;
  acc0["mean"] = summary.test_stats_no_ft.mean;
  acc0["std"] = summary.test_stats_no_ft.std_dev;
  acc0["std_undefined"] = summary.test_stats_no_ft.std_undefined;
  j["test_accuracy_no_ft"] = acc0;

  nlohmann::ordered_json per_client = nlohmann::ordered_json::array();
  for (const RunResult& r : summary.runs) per_client.push_back(r.client_test_acc);
  j["client_test_acc"] = per_client;

  nlohmann::ordered_json final_val = nlohmann::ordered_json::array();
  for (const RunResult& r : summary.runs)
    final_val.push_back(r.rounds.empty() ? 0.0 : r.rounds.back().mean_val_acc);
  j["final_mean_val_acc"] = final_val;

  j["config_snapshot"] = config_snapshot(pc);
  return j.dump(2) + "\n";
}

namespace {

void persist_summary(const RunSummary& summary, const ParsedConfig& pc,
                     const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "config.snapshot", config_snapshot(pc));
  write_file(fs::path(out_dir) / "rounds.csv", rounds_csv(summary));
  write_file(fs::path(out_dir) / "timings.csv", timings_csv(summary));
  write_file(fs::path(out_dir) / "summary.json", summary_json(summary, pc));
  if (pc.cfg.dump_partition) {
    for (std::size_t r = 0; r < summary.runs.size(); ++r)
      write_file(fs::path(out_dir) / ("partition_" + std::to_string(r) + ".json"),
                 summary.runs[r].partition_json);
  }
}

}  // namespace

RunSummary cmd_run(const ParsedConfig& pc, const std::string& out_dir) {
  if (pc.methods.size() != 1)
    throw ConfigError("run: exactly one method expected (got a list)");
  RunSummary summary;
  summary.config = pc.cfg;
  std::vector<double> accs, accs_no_ft;
  for (int r = 0; r < pc.cfg.repeats; ++r) {
    std::uint64_t seed = derive_run_seed(pc.cfg.seed, r);
    try {
      summary.runs.push_back(run_federation(pc.cfg, seed));
    } catch (const std::exception& e) {
      // keep what completed, mark the summary, persist, then surface the fault
      summary.aborted = true;
      summary.abort_reason =
          "repeat " + std::to_string(r) + " failed: " + e.what();
      if (!accs.empty()) {
        summary.test_stats = summarize(accs);
        summary.test_stats_no_ft = summarize(accs_no_ft);
      }
      persist_summary(summary, pc, out_dir);
      throw;
    }
    summary.seeds.push_back(seed);
    accs.push_back(summary.runs.back().test_accuracy);
    accs_no_ft.push_back(summary.runs.back().test_accuracy_no_ft);
  }
  summary.test_stats = summarize(accs);
  summary.test_stats_no_ft = summarize(accs_no_ft);
  persist_summary(summary, pc, out_dir);
  return summary;
}

void cmd_sweep(const ParsedConfig& pc, const SweepSpec& spec,
               const std::string& out_dir) {
  fs::create_directories(out_dir);

  struct Cell {
    double mean = 0.0, std_dev = 0.0, final_val = 0.0;
  };
  std::vector<std::vector<Cell>> cells(pc.methods.size());

  for (std::size_t mi = 0; mi < pc.methods.size(); ++mi) {
    for (double v : spec.values) {
      ParsedConfig sub = pc;
      sub.methods = {pc.methods[mi]};
      sub.cfg.method = pc.methods[mi];
      if (spec.axis == "clients")
        sub.cfg.clients = static_cast<int>(v);
      else if (spec.axis == "data_ratio")
        sub.cfg.data_ratio = v;
      else if (spec.axis == "alpha_label")
        sub.cfg.alpha_label = v;
      else if (spec.axis == "learning_rate")
        sub.cfg.learning_rate = v;
      validate(sub.cfg);

      std::string sub_dir = pc.methods[mi] + "_" + spec.axis + "_" + fmt_short(v);
      RunSummary summary = cmd_run(sub, (fs::path(out_dir) / sub_dir).string());

      Cell cell;
      cell.mean = summary.test_stats.mean;
      cell.std_dev = summary.test_stats.std_dev;
      double fv = 0.0;
      for (const RunResult& r : summary.runs)
        fv += r.rounds.empty() ? 0.0 : r.rounds.back().mean_val_acc;
      cell.final_val = fv / static_cast<double>(summary.runs.size());
      cells[mi].push_back(cell);
    }
  }

  // combined.csv mirrors the accuracy-vs-setting tables: one method per row,
  // one column per axis value, then the average rank.
  std::vector<std::vector<double>> acc_table(pc.methods.size());
  for (std::size_t mi = 0; mi < pc.methods.size(); ++mi)
    for (const Cell& c : cells[mi]) acc_table[mi].push_back(c.mean);
  std::vector<double> ranks = average_rank(acc_table);

  std::ostringstream combined;
  combined << "method";
  for (double v : spec.values) combined << ',' << spec.axis << '=' << fmt_short(v);
  combined << ",average_rank\n";
  for (std::size_t mi = 0; mi < pc.methods.size(); ++mi) {
    combined << pc.methods[mi];
    for (const Cell& c : cells[mi]) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%.4f±%.4f", c.mean, c.std_dev);
      combined << ',' << buf;
    }
    char rbuf[16];
    std::snprintf(rbuf, sizeof rbuf, "%.1f", ranks[mi]);
    combined << ',' << rbuf << "\n";
  }
  write_file(fs::path(out_dir) / "combined.csv", combined.str());

  if (spec.axis == "learning_rate") {
    // pick the validation-best learning rate per method; keep the whole grid
    std::ostringstream tuning;
    tuning << "method,learning_rate,final_val_acc_mean,selected\n";
    for (std::size_t mi = 0; mi < pc.methods.size(); ++mi) {
      std::size_t best = 0;
      for (std::size_t vi = 1; vi < spec.values.size(); ++vi)
        if (cells[mi][vi].final_val > cells[mi][best].final_val) best = vi;
      for (std::size_t vi = 0; vi < spec.values.size(); ++vi)
        tuning << pc.methods[mi] << ',' << fmt_short(spec.values[vi]) << ','
               << fmt(cells[mi][vi].final_val) << ','
               << (vi == best ? "yes" : "no") << "\n";
    }
    write_file(fs::path(out_dir) / "tuning.csv", tuning.str());
  }
}

std::string traffic_csv(const ArchSpec& arch, bool include_bytes) {
  std::ostringstream out;
  out << "method,architecture,params_per_round,ratio_vs_fedavg,published_match";
  if (include_bytes) out << ",bytes_f64";
  out << "\n";
  long long fedavg = traffic_per_round("fedavg", arch);
  for (const std::string& m : traffic_method_ids()) {
    long long t = traffic_per_round(m, arch);
    out << m << ',' << arch.name << ',' << t << ',';
    if (fedavg > 0) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f",
                    static_cast<double>(t) / static_cast<double>(fedavg));
      out << buf;
    } else {
      out << '-';
    }
    auto ref = reference_traffic(m, arch.name);
    out << ',' << (ref ? (*ref == t ? "yes" : "no") : "-");
    if (include_bytes) out << ',' << t * 8;
    out << "\n";
  }
  return out.str();
}

std::string plotdata_csv(const std::string& results_dir) {
  // accept a single run directory or a tree of them (one level deep)
  std::vector<fs::path> run_dirs;
  fs::path root(results_dir);
  if (!fs::exists(root))
    throw ConfigError(results_dir + ": no such results directory");
  if (fs::exists(root / "rounds.csv")) {
    run_dirs.push_back(root);
  } else if (fs::is_directory(root)) {
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_directory() && fs::exists(entry.path() / "rounds.csv"))
        run_dirs.push_back(entry.path());
    std::sort(run_dirs.begin(), run_dirs.end());
  }
  if (run_dirs.empty())
    throw ConfigError(results_dir + ": no rounds.csv found (not a results directory)");

  // method -> round -> (sum, count)
  std::map<std::string, std::map<int, std::pair<double, long>>> curves;
  for (const fs::path& dir : run_dirs) {
    std::ifstream sj(dir / "summary.json");
    if (!sj) throw ConfigError((dir / "summary.json").string() + ": missing");
    nlohmann::json meta = nlohmann::json::parse(sj);
    std::string method = meta.at("method").get<std::string>();
    if (meta.value("fine_tune", false)) method += "+ft";

    std::ifstream rc(dir / "rounds.csv");
    std::string line;
    std::getline(rc, line);  // header
    while (std::getline(rc, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string cell;
      std::getline(ls, cell, ',');  // repeat
      std::getline(ls, cell, ',');
      int round = std::stoi(cell);
      std::getline(ls, cell, ',');  // client
      std::getline(ls, cell, ',');
      double val = std::stod(cell);
      auto& slot = curves[method][round];
      slot.first += val;
      slot.second += 1;
    }
  }

  std::ostringstream out;
  out << "round,method,mean_val_acc\n";
  for (const auto& [method, rounds] : curves)
    for (const auto& [round, sc] : rounds)
      out << round << ',' << method << ','
          << fmt(sc.first / static_cast<double>(sc.second)) << "\n";
  return out.str();
}

}  // namespace fedsim
