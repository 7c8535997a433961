// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedsim/models.hpp"

namespace fedsim {

// ---------------------------------------------------------------------------
// Per-round, per-client payload schedule. Plans are static: traffic does not
// depend on client count, data ratio, heterogeneity, or round index.
// ---------------------------------------------------------------------------
enum class Direction { kDown, kUp };

struct PayloadDesc {
  Direction direction = Direction::kDown;
  Selector selector = Selector::kAll;
  int multiplicity = 1;
};

struct ExchangePlan {
  std::vector<PayloadDesc> payloads;

  long long params_per_round(const ArchSpec& arch) const;
  long long params_per_round(Direction dir, const ArchSpec& arch) const;
};

// Registered plan for a method id (k is the HypCluster cluster count).
// Throws InvalidArgument for unknown methods.
ExchangePlan exchange_plan_for(const std::string& method, int hypcluster_k = 2);

// Parameters exchanged between one client and the server in one round.
long long traffic_per_round(const std::string& method, const ArchSpec& arch,
                            int hypcluster_k = 2);

// The published reference figures for the five bundled architectures, used by
// the traffic report to flag matching cells. Empty when the (method, arch)
// cell has no reference value.
std::optional<long long> reference_traffic(const std::string& method,
                                           const std::string& arch_name);

// The ten federated method ids in reporting order.
const std::vector<std::string>& traffic_method_ids();

// ---------------------------------------------------------------------------
// Cross-run statistics.
// ---------------------------------------------------------------------------

// Mean and sample standard deviation (R-1 denominator). A single value has
// undefined std, reported as 0 with the flag set.
struct SummaryStats {
  double mean = 0.0;
  double std_dev = 0.0;
  int count = 0;
  bool std_undefined = false;
};
SummaryStats summarize(const std::vector<double>& values);

// Per-method average rank across settings. `table[m][s]` is the accuracy of
// method m in setting s; rank 1 is the best accuracy within a setting and
// ties share the mean of their ranks.
std::vector<double> average_rank(const std::vector<std::vector<double>>& table);

}  // namespace fedsim
