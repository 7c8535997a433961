// SPDX-License-Identifier: Apache-2.0
#include "fedsim/accounting.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace fedsim {

long long ExchangePlan::params_per_round(const ArchSpec& arch) const {
  long long total = 0;
  for (const PayloadDesc& p : payloads) {
    if (p.multiplicity < 1)
      throw InvalidArgument("ExchangePlan: multiplicity must be positive");
    total += static_cast<long long>(p.multiplicity) * arch.param_count(p.selector);
  }
  return total;
}

long long ExchangePlan::params_per_round(Direction dir, const ArchSpec& arch) const {
  long long total = 0;
  for (const PayloadDesc& p : payloads) {
    if (p.direction != dir) continue;
    total += static_cast<long long>(p.multiplicity) * arch.param_count(p.selector);
  }
  return total;
}

ExchangePlan exchange_plan_for(const std::string& method, int hypcluster_k) {
  using D = Direction;
  using S = Selector;
  if (method == "fedavg" || method == "fedprox" || method == "fml" ||
      method == "ditto" || method == "pfedme") {
    return {{{D::kDown, S::kAll, 1}, {D::kUp, S::kAll, 1}}};
  }
  if (method == "hypcluster") {
    if (hypcluster_k < 1)
      throw InvalidArgument("exchange_plan_for: hypcluster needs k >= 1");
    return {{{D::kDown, S::kAll, hypcluster_k}, {D::kUp, S::kAll, 1}}};
  }
  if (method == "fedme") {
    return {{{D::kDown, S::kAll, 3}, {D::kUp, S::kAll, 2}}};
  }
  if (method == "lgfedavg") {
    return {{{D::kDown, S::kHead, 1}, {D::kUp, S::kHead, 1}}};
  }
  if (method == "fedper" || method == "fedrep") {
    return {{{D::kDown, S::kBody, 1}, {D::kUp, S::kBody, 1}}};
  }
  if (method == "local_only" || method == "centralized") {
    return {};
  }
  throw InvalidArgument("exchange_plan_for: no plan registered for method '" +
                        method + "'");
}

long long traffic_per_round(const std::string& method, const ArchSpec& arch,
                            int hypcluster_k) {
  return exchange_plan_for(method, hypcluster_k).params_per_round(arch);
}

const std::vector<std::string>& traffic_method_ids() {
  static const std::vector<std::string> ids = {
      "fedavg", "fedprox", "hypcluster", "fml",   "fedme",
      "lgfedavg", "fedper", "fedrep",    "ditto", "pfedme"};
  return ids;
}

namespace {

// Published per-round traffic (parameters per client) for the bundled
// architectures.
const std::map<std::pair<std::string, std::string>, long long> kReferenceTraffic = {
    {{"fedavg", "femnist"}, 2413180},      {{"fedavg", "shakespeare"}, 1645140},
    {{"fedavg", "sent140"}, 161344},       {{"fedavg", "mnist"}, 2399764},
    {{"fedavg", "cifar10"}, 19870868},

    {{"fedprox", "femnist"}, 2413180},     {{"fedprox", "shakespeare"}, 1645140},
    {{"fedprox", "sent140"}, 161344},      {{"fedprox", "mnist"}, 2399764},
    {{"fedprox", "cifar10"}, 19870868},

    {{"hypcluster", "femnist"}, 3619770},  {{"hypcluster", "shakespeare"}, 2467710},
    {{"hypcluster", "sent140"}, 242016},   {{"hypcluster", "mnist"}, 3599646},
    {{"hypcluster", "cifar10"}, 29806302},

    {{"fml", "femnist"}, 2413180},         {{"fml", "shakespeare"}, 1645140},
    {{"fml", "sent140"}, 161344},          {{"fml", "mnist"}, 2399764},
    {{"fml", "cifar10"}, 19870868},

    {{"fedme", "femnist"}, 6032950},       {{"fedme", "shakespeare"}, 4112850},
    {{"fedme", "sent140"}, 403360},        {{"fedme", "mnist"}, 5999410},
    {{"fedme", "cifar10"}, 49677170},

    {{"lgfedavg", "femnist"}, 15996},      {{"lgfedavg", "shakespeare"}, 46260},
    {{"lgfedavg", "sent140"}, 25644},      {{"lgfedavg", "mnist"}, 2580},
    {{"lgfedavg", "cifar10"}, 1060884},

    {{"fedper", "femnist"}, 2397184},      {{"fedper", "shakespeare"}, 1598880},
    {{"fedper", "sent140"}, 161300},       {{"fedper", "mnist"}, 2397184},
    {{"fedper", "cifar10"}, 18809984},

    {{"fedrep", "femnist"}, 2397184},      {{"fedrep", "shakespeare"}, 1598880},
    {{"fedrep", "sent140"}, 161300},       {{"fedrep", "mnist"}, 2397184},
    {{"fedrep", "cifar10"}, 18809984},

    {{"ditto", "femnist"}, 2413180},       {{"ditto", "shakespeare"}, 1645140},
    {{"ditto", "sent140"}, 161344},        {{"ditto", "mnist"}, 2399764},
    {{"ditto", "cifar10"}, 19870868},

    {{"pfedme", "femnist"}, 2413180},      {{"pfedme", "shakespeare"}, 1645140},
    {{"pfedme", "sent140"}, 161344},       {{"pfedme", "mnist"}, 2399764},
    {{"pfedme", "cifar10"}, 19870868},
};

}  // namespace

std::optional<long long> reference_traffic(const std::string& method,
                                           const std::string& arch_name) {
  auto it = kReferenceTraffic.find({method, arch_name});
  if (it == kReferenceTraffic.end()) return std::nullopt;
  return it->second;
}

SummaryStats summarize(const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("summarize: no values");
  SummaryStats s;
  s.count = static_cast<int>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) {
    s.std_undefined = true;
    s.std_dev = 0.0;
    return s;
  }
  bool constant = true;
  for (double v : values)
    if (v != values.front()) constant = false;
  if (constant) {
    s.mean = values.front();
    s.std_dev = 0.0;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

std::vector<double> average_rank(const std::vector<std::vector<double>>& table) {
  if (table.empty()) return {};
  const std::size_t methods = table.size();
  const std::size_t settings = table.front().size();
  for (const auto& row : table)
    if (row.size() != settings)
      throw InvalidArgument("average_rank: ragged table");
  if (settings == 0) throw InvalidArgument("average_rank: no settings");

  std::vector<double> totals(methods, 0.0);
  for (std::size_t s = 0; s < settings; ++s) {
    // sort descending by accuracy; ties get the mean of their rank positions
    std::vector<std::size_t> order(methods);
    for (std::size_t m = 0; m < methods; ++m) order[m] = m;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return table[a][s] > table[b][s];
    });
    std::size_t i = 0;
    while (i < methods) {
      std::size_t j = i;
      while (j + 1 < methods && table[order[j + 1]][s] == table[order[i]][s]) ++j;
      double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
      for (std::size_t k = i; k <= j; ++k) totals[order[k]] += shared;
      i = j + 1;
    }
  }
  for (double& t : totals) t /= static_cast<double>(settings);
  return totals;
}

}  // namespace fedsim
