// SPDX-License-Identifier: Apache-2.0
#include "fedsim/numcore.hpp"

#include <cmath>

namespace fedsim {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw InvalidArgument("matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.values.data() + k * b.cols;
      double* crow = c.values.data() + i * c.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw InvalidArgument("matmul_at_b: row counts differ");
  Matrix c(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.values.data() + k * a.cols;
    const double* brow = b.values.data() + k * b.cols;
    for (std::size_t i = 0; i < a.cols; ++i) {
      double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.values.data() + i * c.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw InvalidArgument("matmul_a_bt: column counts differ");
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.values.data() + i * a.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.values.data() + j * b.cols;
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      c.at(i, j) = s;
    }
  }
  return c;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw InvalidArgument("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : state_(mix64(seed ^ mix64(stream_id ^ 0x6a09e667f3bcc909ULL))) {}

std::uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  double u1 = 1.0 - next_double();  // (0, 1]
  double u2 = next_double();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  cached_gaussian_ = r * std::sin(theta);
  has_cached_gaussian_ = true;
  return r * std::cos(theta);
}

double RngStream::next_gamma(double shape) {
  if (!(shape > 0.0)) throw InvalidArgument("next_gamma: shape must be positive");
  if (shape < 1.0) {
    double u = next_double();
    while (u == 0.0) u = next_double();
    return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = next_gaussian();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = next_double();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("next_below: n must be positive");
  return next_u64() % n;
}

std::uint64_t stream_id(std::uint64_t purpose, std::uint64_t entity,
                        std::uint64_t round) {
  return (purpose << 48) | ((entity & 0xffffffULL) << 24) | (round & 0xffffffULL);
}

std::uint64_t derive_run_seed(std::uint64_t master_seed, int repeat) {
  RngStream s(master_seed,
              stream_id(stream::kRepeat, static_cast<std::uint64_t>(repeat)));
  return s.next_u64();
}

std::vector<double> dirichlet_sample(double alpha, std::size_t n, RngStream& rng) {
  if (!(alpha > 0.0)) throw InvalidArgument("dirichlet_sample: alpha must be positive");
  if (n == 0) throw InvalidArgument("dirichlet_sample: n must be at least 1");
  std::vector<double> out(n);
  for (int attempt = 0; attempt < 100; ++attempt) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = rng.next_gamma(alpha);
      sum += out[i];
    }
    if (sum > 0.0 && std::isfinite(sum)) {
      for (double& x : out) x /= sum;
      return out;
    }
  }
  throw NumericFault("dirichlet_sample: gamma draws degenerate after 100 attempts");
}

void sgd_step(std::span<double> params, std::span<const double> grads,
              SgdState& state) {
  if (params.size() != grads.size())
    throw InvalidArgument("sgd_step: parameter/gradient dimension mismatch");
  if (!all_finite(grads)) throw NumericFault("sgd_step: non-finite gradient");
  if (state.velocity.empty()) state.velocity.assign(params.size(), 0.0);
  if (state.velocity.size() != params.size())
    throw InvalidArgument("sgd_step: velocity dimension mismatch");
  const double m = state.momentum;
  const double wd = state.weight_decay;
  const double lr = state.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double v = m * state.velocity[i] + (grads[i] + wd * params[i]);
    state.velocity[i] = v;
    params[i] -= lr * v;
  }
}

void clip_global_norm_inplace(std::span<double> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw InvalidArgument("clip_global_norm: max_norm must be positive");
  if (!all_finite(grads)) throw NumericFault("clip_global_norm: non-finite gradient");
  double norm = l2_norm(grads);
  // Relative slack keeps the operation exactly idempotent: rescaled vectors
  // land within a few ulps of max_norm and are then left untouched.
  if (norm <= max_norm * (1.0 + 1e-12)) return;
  double scale = max_norm / norm;
  for (double& g : grads) g *= scale;
}

std::vector<double> clip_global_norm(std::vector<double> grads, double max_norm) {
  clip_global_norm_inplace(grads, max_norm);
  return grads;
}

}  // namespace fedsim
