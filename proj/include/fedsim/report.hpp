// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "fedsim/config.hpp"
#include "fedsim/engine.hpp"

namespace fedsim {

// ---------------------------------------------------------------------------
// Output persistence. Every results directory is self-describing: a config
// snapshot, schema version, and tool version travel with the data. rounds.csv
// and summary.json are byte-stable across reruns of the same seed; wall-clock
// timing goes to timings.csv, which is exempt from that guarantee.
// ---------------------------------------------------------------------------

// rounds.csv rows: repeat,round,client_id,val_acc,traffic_params
std::string rounds_csv(const RunSummary& summary);
// timings.csv rows: repeat,round,wall_ms
std::string timings_csv(const RunSummary& summary);
std::string summary_json(const RunSummary& summary, const ParsedConfig& pc);

// Runs run_repeats and writes config.snapshot, rounds.csv, timings.csv,
// summary.json (and partition_<r>.json when enabled) into out_dir.
RunSummary cmd_run(const ParsedConfig& pc, const std::string& out_dir);

// One sub-run per (method, axis value) under out_dir; writes combined.csv
// (methods x values, mean±std cells, average-rank column) and, for the
// learning_rate axis, tuning.csv with the full grid and the validation-best
// pick per method.
void cmd_sweep(const ParsedConfig& pc, const SweepSpec& spec,
               const std::string& out_dir);

// Per-method traffic rows for one architecture:
// method,architecture,params_per_round,ratio_vs_fedavg,published_match[,bytes_f64]
// The bytes column is a non-published convenience view (parameters x 8).
std::string traffic_csv(const ArchSpec& arch, bool include_bytes);

// Long-format convergence data (round,method,mean_val_acc) from a results
// directory produced by cmd_run, or from a tree of them.
std::string plotdata_csv(const std::string& results_dir);

}  // namespace fedsim
