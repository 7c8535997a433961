// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedsim/numcore.hpp"

namespace fedsim {

struct Dataset {
  Matrix x;                 // N x d features
  std::vector<int> labels;  // values in [0, classes)
  int classes = 0;

  std::size_t size() const { return x.rows; }
  std::size_t dim() const { return x.cols; }
};

// Rows of `d` selected by `indices`, in the given order.
Dataset take(const Dataset& d, const std::vector<std::size_t>& indices);

// Class-conditional Gaussian data: one mean per class drawn with scale
// `separation`, samples drawn around it with scale `noise`, labels uniform.
Dataset generate_synthetic(int classes, int dim, std::size_t samples,
                           double separation, double noise, RngStream& rng);

// ---------------------------------------------------------------------------
// Dirichlet label-skew partitioning. One proportion vector p_c per class is
// drawn from Dirichlet(alpha * 1_S) and used to allocate BOTH the train and
// the test samples of that class across clients (per-sample categorical
// draws after one shuffle). Index lists come out sorted ascending. If any
// client ends up with zero train samples the whole plan is re-drawn, at most
// 100 times.
// ---------------------------------------------------------------------------
struct PartitionPlan {
  std::vector<std::vector<std::size_t>> train_indices;  // per client
  std::vector<std::vector<std::size_t>> test_indices;   // per client
  std::vector<std::vector<double>> class_proportions;   // p_c per class
  int attempts = 1;

  std::string to_json() const;
};

PartitionPlan partition_dirichlet(const Dataset& train, const Dataset& test,
                                  int clients, double alpha_label,
                                  RngStream& rng);

// Uniform subsample without replacement of floor(ratio * N) records; the
// surviving rows keep their original relative order. ratio == 1 is the
// identity.
Dataset subsample_ratio(const Dataset& d, double ratio, RngStream& rng);

// Random disjoint exhaustive split; validation gets
// floor(n * val_parts / (train_parts + val_parts)) samples. Fewer than 2
// samples leaves validation empty and sets `degenerate`.
struct TrainValSplit {
  Dataset train;
  Dataset validation;
  bool degenerate = false;
};
TrainValSplit split_train_val(const Dataset& d, int train_parts, int val_parts,
                              RngStream& rng);

// Removes up to n random samples from the pool, stripping their labels. When
// the pool is smaller than n, takes everything and sets `short_pool`.
struct UnlabeledExtract {
  Matrix unlabeled;
  Dataset remaining;
  bool short_pool = false;
};
UnlabeledExtract extract_unlabeled(const Dataset& pool, std::size_t n,
                                   RngStream& rng);

// ---------------------------------------------------------------------------
// IDX image/label files (big-endian, as used for MNIST-style datasets).
// Pixels are scaled to [0, 1] by dividing by 255.
// ---------------------------------------------------------------------------
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
// Writes rows as unsigned bytes round(255 * clamp(x, 0, 1)); exact for data
// already on the /255 grid.
void save_idx(const Dataset& d, const std::string& images_path,
              const std::string& labels_path);

// CSV with header "label,f0,f1,...".
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& d, const std::string& path);

// Client-side bundle produced by the data pipeline.
struct ClientData {
  Dataset train;
  Dataset validation;
  Dataset test;
  bool degenerate = false;
};

}  // namespace fedsim
