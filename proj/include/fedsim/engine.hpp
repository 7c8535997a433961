// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fedsim/accounting.hpp"
#include "fedsim/strategies.hpp"

namespace fedsim {

struct RoundMetrics {
  int round = 0;
  std::vector<double> client_val_acc;  // one entry per client
  double mean_val_acc = 0.0;           // unweighted mean over clients
  long long traffic_params = 0;        // parameters exchanged per client
  double wall_ms = 0.0;
};

// One seeded run.
struct RunResult {
  std::uint64_t run_seed = 0;
  std::vector<RoundMetrics> rounds;
  std::vector<double> client_test_acc;  // configured variant (post-FT if enabled)
  double test_accuracy = 0.0;           // micro average over all test samples
  double test_accuracy_no_ft = 0.0;     // micro average before fine-tuning
  std::string partition_json;           // filled when cfg.dump_partition
};

struct RunSummary {
  FederationConfig config;
  std::vector<std::uint64_t> seeds;
  std::vector<RunResult> runs;
  SummaryStats test_stats;        // over per-run test_accuracy
  SummaryStats test_stats_no_ft;  // over per-run test_accuracy_no_ft
  bool aborted = false;           // a repeat failed; completed runs are kept
  std::string abort_reason;
};

// Argmax-prediction micro accuracy; ties resolve to the lowest class index.
// Empty datasets evaluate to 0.
double evaluate(const MlpSpec& spec, const ParamVector& params,
                const Dataset& data);

// Builds the data pipeline for one seed: generate/load, subsample by D,
// extract the unlabeled pool (FedMe), Dirichlet-partition, per-client
// train/validation split.
RunEnv build_run_env(const FederationConfig& cfg, std::uint64_t run_seed);

// Partition -> T rounds of (download, local update, validation record,
// upload, aggregate) -> optional fine-tuning -> per-client test evaluation.
// Deterministic given (cfg, run_seed); client updates may fan out over
// cfg.threads workers with bitwise-identical results.
RunResult run_federation(const FederationConfig& cfg, std::uint64_t run_seed);

// R runs whose seeds derive from cfg.seed, mean and std aggregated.
RunSummary run_repeats(const FederationConfig& cfg);
// Same with explicit seeds (one run per entry).
RunSummary run_repeats_with_seeds(const FederationConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds);

}  // namespace fedsim
