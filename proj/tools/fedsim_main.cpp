// SPDX-License-Identifier: Apache-2.0
//
// fedsim command line: run / sweep / traffic / plotdata. Everything behind
// the C API in fedsim.h; this binary only parses arguments and moves bytes.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fedsim.h"

namespace {

constexpr size_t kErrLen = 1024;

int exit_code_for(fedsim_status st) {
  switch (st) {
    case FEDSIM_OK:
      return 0;
    case FEDSIM_ERR_CONFIG:
    case FEDSIM_ERR_FORMAT:
    case FEDSIM_ERR_INVALID_ARGUMENT:
      return 2;  // user input problems
    default:
      return 1;  // runtime faults
  }
}

int fail(fedsim_status st, const char* err) {
  std::cerr << "fedsim: " << fedsim_status_name(st) << ": " << err << "\n";
  return exit_code_for(st);
}

struct ConfigHandle {
  fedsim_config_t* cfg = nullptr;
  ~ConfigHandle() { fedsim_config_free(cfg); }
};

int load_config(const std::string& path, const std::string& seed,
                const std::string& repeats, ConfigHandle& handle) {
  char err[kErrLen] = {0};
  fedsim_status st = fedsim_config_load(path.c_str(), &handle.cfg, err, kErrLen);
  if (st != FEDSIM_OK) return fail(st, err);

  // precedence: flag > environment > config file
  std::string seed_value = seed;
  if (seed_value.empty()) {
    if (const char* env = std::getenv("FEDSIM_SEED")) seed_value = env;
  }
  if (!seed_value.empty()) {
    st = fedsim_config_set(handle.cfg, "seed", seed_value.c_str(), err, kErrLen);
    if (st != FEDSIM_OK) return fail(st, err);
  }
  if (!repeats.empty()) {
    st = fedsim_config_set(handle.cfg, "repeats", repeats.c_str(), err, kErrLen);
    if (st != FEDSIM_OK) return fail(st, err);
  }
  return -1;  // keep going
}

std::string resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("FEDSIM_OUT")) return env;
  return "";
}

int emit(const char* csv, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << csv;
    return 0;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    std::cerr << "fedsim: io-error: cannot write " << out_path << "\n";
    return 1;
  }
  out << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("fedsim ") + fedsim_version() +
               " - federated learning simulation benchmark"};
  app.require_subcommand(1);

  // run
  std::string run_config, run_seed, run_repeats, run_out;
  CLI::App* run = app.add_subcommand("run", "execute one configured experiment");
  run->add_option("-c,--config", run_config, "configuration file")->required();
  run->add_option("--seed", run_seed, "override the master seed");
  run->add_option("--repeats", run_repeats, "override the repeat count");
  run->add_option("--out", run_out, "results directory (also FEDSIM_OUT)");

  // sweep
  std::string sweep_config, sweep_axis, sweep_values, sweep_seed, sweep_out;
  CLI::App* sweep = app.add_subcommand("sweep", "run one sub-run per axis value");
  sweep->add_option("-c,--config", sweep_config, "configuration file")->required();
  sweep->add_option("--axis", sweep_axis,
                    "clients | data_ratio | alpha_label | learning_rate")
      ->required();
  sweep->add_option("--values", sweep_values, "comma-separated axis values")->required();
  sweep->add_option("--seed", sweep_seed, "override the master seed");
  sweep->add_option("--out", sweep_out, "results directory (also FEDSIM_OUT)");

  // traffic
  std::string traffic_arch, traffic_out;
  bool traffic_bytes = false;
  CLI::App* traffic =
      app.add_subcommand("traffic", "per-method communication traffic report");
  traffic
      ->add_option("--arch", traffic_arch,
                   "bundled name (femnist, shakespeare, sent140, mnist, cifar10) "
                   "or an architecture spec file")
      ->required();
  traffic->add_flag("--bytes", traffic_bytes, "add a bytes column (parameters x 8)");
  traffic->add_option("--out", traffic_out, "write CSV here instead of stdout");

  // plotdata
  std::string plot_dir, plot_out;
  CLI::App* plot =
      app.add_subcommand("plotdata", "convergence-curve CSV from a results directory");
  plot->add_option("dir", plot_dir, "results directory")->required();
  plot->add_option("--out", plot_out, "write CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  char err[kErrLen] = {0};

  if (run->parsed()) {
    ConfigHandle handle;
    int rc = load_config(run_config, run_seed, run_repeats, handle);
    if (rc >= 0) return rc;
    std::string out = resolve_out(run_out);
    fedsim_status st = fedsim_run(handle.cfg, out.c_str(), err, kErrLen);
    if (st != FEDSIM_OK) return fail(st, err);
    std::cout << "results written to " << (out.empty() ? "config out_dir" : out) << "\n";
    return 0;
  }

  if (sweep->parsed()) {
    ConfigHandle handle;
    int rc = load_config(sweep_config, sweep_seed, "", handle);
    if (rc >= 0) return rc;
    std::string out = resolve_out(sweep_out);
    fedsim_status st = fedsim_sweep(handle.cfg, sweep_axis.c_str(),
                                    sweep_values.c_str(), out.c_str(), err, kErrLen);
    if (st != FEDSIM_OK) return fail(st, err);
    std::cout << "sweep results written to " << (out.empty() ? "config out_dir" : out)
              << "\n";
    return 0;
  }

  if (traffic->parsed()) {
    char* csv = nullptr;
    fedsim_status st = fedsim_traffic_report(traffic_arch.c_str(),
                                             traffic_bytes ? 1 : 0, &csv, err, kErrLen);
    if (st != FEDSIM_OK) return fail(st, err);
    int rc = emit(csv, traffic_out);
    fedsim_string_free(csv);
    return rc;
  }

  if (plot->parsed()) {
    char* csv = nullptr;
    fedsim_status st = fedsim_plotdata(plot_dir.c_str(), &csv, err, kErrLen);
    if (st != FEDSIM_OK) return fail(st, err);
    int rc = emit(csv, plot_out);
    fedsim_string_free(csv);
    return rc;
  }

  return 2;
}
