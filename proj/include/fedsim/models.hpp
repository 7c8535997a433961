// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedsim/numcore.hpp"

namespace fedsim {

// Parameters are split into a shared/private pair for the model-splitting
// methods: BODY is the input side, HEAD the output side.
enum class SplitTag { kBody, kHead };

enum class Selector { kAll, kBody, kHead };

const char* to_string(SplitTag tag);
const char* to_string(Selector sel);

// ---------------------------------------------------------------------------
// Flat parameter vector with named, contiguous, non-overlapping segments that
// cover the whole vector. Each segment carries a split tag.
// ---------------------------------------------------------------------------
struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
  SplitTag tag = SplitTag::kBody;
};

class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(std::vector<double> values, std::vector<Segment> segments);

  std::size_t size() const { return values_.size(); }
  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<Segment>& segments() const { return segments_; }

  std::span<double> segment_span(std::size_t i) {
    return {values_.data() + segments_[i].offset, segments_[i].length};
  }
  std::span<const double> segment_span(std::size_t i) const {
    return {values_.data() + segments_[i].offset, segments_[i].length};
  }

  std::size_t count(Selector sel) const;

  // Sub-vector holding the segments carrying the selected tag, in original
  // order, with rebased offsets. Throws InvalidArgument on empty selection.
  ParamVector split_view(Selector sel) const;

  // Writes a view produced by split_view back into the matching segments
  // (matched by name).
  void assign_view(const ParamVector& view);

  ParamVector zeros_like() const;

  bool operator==(const ParamVector& other) const {
    return values_ == other.values_;
  }

 private:
  std::vector<double> values_;
  std::vector<Segment> segments_;
};

// Inverse of splitting into BODY and HEAD views for layouts where all BODY
// segments precede all HEAD segments (true of every layer-wise split here):
// the concatenation reproduces the original vector bitwise.
ParamVector reconstruct(const ParamVector& body, const ParamVector& head);

// ---------------------------------------------------------------------------
// Multi-layer perceptron: ReLU hidden layers, softmax output. Zero hidden
// layers gives multinomial logistic regression. Parameters live in a
// ParamVector with one weight and one bias segment per layer; the final layer
// is tagged HEAD, everything else BODY.
// ---------------------------------------------------------------------------
struct MlpSpec {
  std::vector<int> layer_sizes;  // [d_in, hidden..., classes]

  int input_dim() const { return layer_sizes.front(); }
  int classes() const { return layer_sizes.back(); }
  std::size_t param_count() const;
};

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> activations;  // post-ReLU hidden activations
  Matrix probabilities;
};

class MlpModel {
 public:
  MlpModel(MlpSpec spec, ParamVector params);

  // Symmetric uniform init in +/- 1/sqrt(fan_in), layer by layer (weights
  // then bias), drawn sequentially from one stream.
  static ParamVector init_params(const MlpSpec& spec, RngStream& rng);
  static ParamVector zero_params(const MlpSpec& spec);

  const MlpSpec& spec() const { return spec_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

  // Probabilities (B x C); rows sum to 1 within 1e-9. Fills cache if given.
  Matrix forward(const Matrix& batch, ForwardCache* cache = nullptr) const;

  // Backprop from a logit-space gradient (B x C) to parameter gradients.
  ParamVector backward_from_dlogits(const ForwardCache& cache,
                                    const Matrix& dlogits) const;

  // Accounting view of this model (one Linear layer per weight+bias pair).
  struct ArchSpecOut;

 private:
  MlpSpec spec_;
  ParamVector params_;
};

// Mean negative log-likelihood of the labels under row-stochastic probs.
double ce_loss(const Matrix& probs, std::span<const int> labels);
// Gradient of ce_loss with respect to the logits: (p - onehot) / B.
Matrix ce_dlogits(const Matrix& probs, std::span<const int> labels);

// Mean CE loss and parameter gradients for a cached forward pass.
std::pair<double, ParamVector> backward_ce(const MlpModel& model,
                                           const ForwardCache& cache,
                                           std::span<const int> labels);

// KL(teacher || student), averaged over the batch, with the gradient taken
// with respect to the student's logits: (student - teacher) / B. Student
// probabilities below 1e-12 under nonzero teacher mass are clamped for the
// value computation and flagged.
struct KlResult {
  double value = 0.0;
  Matrix dlogits_student;
  bool clamped = false;
};
KlResult kl_grad(const Matrix& student_probs, const Matrix& teacher_probs);

// ---------------------------------------------------------------------------
// Declarative architecture description used for exact parameter accounting.
// File format: one "name <arch>" line, then one "layer <kind> <params> <tag>"
// line per layer, '#' comments allowed.
// ---------------------------------------------------------------------------
struct ArchLayer {
  std::string kind;
  long long trainable_params = 0;
  SplitTag tag = SplitTag::kBody;
};

struct ArchSpec {
  std::string name;
  std::vector<ArchLayer> layers;

  long long param_count(Selector sel) const;

  static ArchSpec parse(std::istream& in, const std::string& source_name);
  static ArchSpec load(const std::string& path);
  std::string serialize() const;
};

// The five bundled architectures: femnist, shakespeare, sent140, mnist,
// cifar10. Throws InvalidArgument for unknown names.
const ArchSpec& builtin_arch(const std::string& name);
const std::vector<std::string>& builtin_arch_names();

// ArchSpec describing a trainable MLP (one Linear layer per weight+bias pair,
// final layer tagged HEAD).
ArchSpec arch_from_mlp(const MlpSpec& spec);

}  // namespace fedsim
