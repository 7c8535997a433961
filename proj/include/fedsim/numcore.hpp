// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstddef>
#include <span>
#include <vector>

#include "fedsim/error.hpp"

namespace fedsim {

// ---------------------------------------------------------------------------
// Dense row-major matrix of 64-bit floats.
// ---------------------------------------------------------------------------
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
  std::size_t size() const { return values.size(); }
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

bool all_finite(std::span<const double> v);
double l2_norm(std::span<const double> v);
// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

// ---------------------------------------------------------------------------
// Deterministic RNG streams.
//
// A stream is the SplitMix64 sequence over the key
//   s0 = mix(seed ^ mix(stream_id ^ 0x6a09e667f3bcc909))
// where mix() is the SplitMix64 finalizer and each call advances the state by
// the golden-ratio increment. The same (seed, stream id) therefore yields the
// same draw sequence on every platform, independent of any other stream, so
// per-client streams can be consumed in any order (or in parallel) without
// affecting results.
//
// Derived draws are fully pinned down as well:
//   next_double    = high 53 bits / 2^53, in [0, 1)
//   next_gaussian  = Box-Muller on (1 - u1, u2), second value cached
//   next_gamma     = Marsaglia-Tsang squeeze for shape >= 1; for shape < 1,
//                    gamma(shape+1) * u^(1/shape) boosting
//   next_below(n)  = next_u64() % n (modulo; bias < 2^-40 for n < 2^24)
// ---------------------------------------------------------------------------
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  double next_double();
  double next_gaussian();
  double next_gamma(double shape);
  std::uint64_t next_below(std::uint64_t n);

  // Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

// Stream-id layout: [purpose:16][entity:24][round:24]. Every random decision
// in a run draws from a stream keyed this way off the run seed, which is what
// makes runs reproducible and client updates order-independent.
namespace stream {
enum Purpose : std::uint64_t {
  kData = 1,       // synthetic dataset generation
  kSubsample = 2,  // data-ratio subsampling
  kPartition = 3,  // Dirichlet label partitioning
  kSplit = 4,      // per-client train/validation split (entity = client)
  kUnlabeled = 5,  // unlabeled-pool extraction
  kInit = 6,       // model initialization (entity = model index)
  kBatch = 7,      // local-training batch order (entity = client, round)
  kFinetune = 8,   // post-training fine-tuning batches (entity = client)
  kDistill = 9,    // unlabeled-pool distillation batches (entity = client, round)
  kCluster = 10,   // server-side clustering (round)
  kRepeat = 11,    // per-repeat seed derivation (entity = repeat index)
};
}  // namespace stream

std::uint64_t stream_id(std::uint64_t purpose, std::uint64_t entity = 0,
                        std::uint64_t round = 0);

// Per-repeat run seeds derived from the master seed.
std::uint64_t derive_run_seed(std::uint64_t master_seed, int repeat);

// ---------------------------------------------------------------------------
// Dirichlet sampling: n per-component gamma(alpha) draws, normalized.
// Result is nonnegative and sums to 1 within 1e-12.
// ---------------------------------------------------------------------------
std::vector<double> dirichlet_sample(double alpha, std::size_t n, RngStream& rng);

// ---------------------------------------------------------------------------
// SGD with momentum and decoupled-from-nothing weight decay (the classic
// "L2 into the gradient" form):
//   v <- momentum * v + (g + weight_decay * w)
//   w <- w - lr * v
// ---------------------------------------------------------------------------
struct SgdState {
  double learning_rate = 0.0;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<double> velocity;  // sized on first step

  SgdState() = default;
  SgdState(double lr, double m, double wd)
      : learning_rate(lr), momentum(m), weight_decay(wd) {}
};

void sgd_step(std::span<double> params, std::span<const double> grads,
              SgdState& state);

// Rescales grads so the global L2 norm does not exceed max_norm. Returns the
// input unchanged (bitwise) when already within the bound; the comparison uses
// a 1e-12 relative slack so the operation is exactly idempotent.
std::vector<double> clip_global_norm(std::vector<double> grads,
                                     double max_norm = 20.0);
void clip_global_norm_inplace(std::span<double> grads, double max_norm = 20.0);

}  // namespace fedsim
