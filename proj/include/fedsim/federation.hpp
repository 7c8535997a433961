// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedsim {

// The twelve method ids: ten federated methods plus the two non-federated
// baselines.
const std::vector<std::string>& method_ids();
bool is_known_method(const std::string& method);

// ---------------------------------------------------------------------------
// One federation run's worth of knobs. Defaults: 20 clients, data ratio 1.0,
// alpha 0.5, E = 2 local epochs, 5 repeats.
// ---------------------------------------------------------------------------
struct FederationConfig {
  std::string method = "fedavg";
  int clients = 20;
  int rounds = 30;       // T (communication rounds)
  int local_epochs = 2;  // E
  int batch_size = 20;
  double learning_rate = 0.005;
  double data_ratio = 1.0;   // D
  double alpha_label = 0.5;  // Dirichlet concentration for label skew
  int repeats = 5;           // R
  std::uint64_t seed = 1;
  bool fine_tune = false;  // the "+FT" variant
  int ft_epochs = 2;       // F
  double ft_learning_rate = -1.0;  // < 0: learning_rate / 2
  int threads = 1;         // client updates fan out across this many workers

  // data source
  std::string dataset = "synthetic";  // synthetic | idx | csv
  int classes = 10;
  int features = 20;
  std::size_t samples = 20000;
  double class_separation = 1.0;
  double noise = 1.0;
  double test_fraction = 0.2;
  std::string train_images, train_labels, test_images, test_labels;
  std::string train_csv, test_csv;

  std::vector<int> hidden = {32};  // MLP hidden sizes; empty = logistic regression
  int split_train_part = 8, split_val_part = 2;  // train:validation ratio

  // method hyperparameters
  double fedprox_mu = 0.001;
  int hypcluster_k = 2;
  double fml_beta = 0.5;
  double fedme_beta = 0.5;
  double fedme_distill_weight = 0.5;
  std::vector<int> fedme_cluster_schedule;  // rounds where the cluster count increments
  std::size_t fedme_unlabeled = 1000;
  double ditto_lambda = 0.75;
  double pfedme_lambda = 15.0;
  int pfedme_k = 5;
  double pfedme_inner_lr = -1.0;  // < 0: use learning_rate
  int fedrep_head_epochs = 2;
  int fedrep_body_epochs = 2;

  bool dump_partition = false;

  double resolved_pfedme_inner_lr() const {
    return pfedme_inner_lr < 0.0 ? learning_rate : pfedme_inner_lr;
  }
  double resolved_ft_learning_rate() const {
    return ft_learning_rate < 0.0 ? learning_rate * 0.5 : ft_learning_rate;
  }
};

// Throws InvalidArgument when any field is out of contract.
void validate(const FederationConfig& cfg);

}  // namespace fedsim
