// SPDX-License-Identifier: Apache-2.0
#include "fedsim/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace fedsim {

const char* to_string(SplitTag tag) {
  return tag == SplitTag::kBody ? "BODY" : "HEAD";
}

const char* to_string(Selector sel) {
  switch (sel) {
    case Selector::kAll: return "ALL";
    case Selector::kBody: return "BODY";
    case Selector::kHead: return "HEAD";
  }
  return "?";
}

namespace {

bool selected(SplitTag tag, Selector sel) {
  return sel == Selector::kAll || (sel == Selector::kBody && tag == SplitTag::kBody) ||
         (sel == Selector::kHead && tag == SplitTag::kHead);
}

}  // namespace

ParamVector::ParamVector(std::vector<double> values, std::vector<Segment> segments)
    : values_(std::move(values)), segments_(std::move(segments)) {
  std::size_t expect = 0;
  for (const Segment& s : segments_) {
    if (s.offset != expect)
      throw InvalidArgument("ParamVector: segments must be contiguous");
    expect += s.length;
  }
  if (expect != values_.size())
    throw InvalidArgument("ParamVector: segments must cover the value vector");
}

std::size_t ParamVector::count(Selector sel) const {
  std::size_t n = 0;
  for (const Segment& s : segments_) {
    if (selected(s.tag, sel)) n += s.length;
  }
  return n;
}

ParamVector ParamVector::split_view(Selector sel) const {
  std::vector<double> vals;
  std::vector<Segment> segs;
  std::size_t off = 0;
  for (const Segment& s : segments_) {
    if (!selected(s.tag, sel)) continue;
    vals.insert(vals.end(), values_.begin() + static_cast<std::ptrdiff_t>(s.offset),
                values_.begin() + static_cast<std::ptrdiff_t>(s.offset + s.length));
    segs.push_back({s.name, off, s.length, s.tag});
    off += s.length;
  }
  if (segs.empty()) throw InvalidArgument("split_view: empty selection");
  return ParamVector(std::move(vals), std::move(segs));
}

void ParamVector::assign_view(const ParamVector& view) {
  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < segments_.size(); ++i) by_name[segments_[i].name] = i;
  for (std::size_t i = 0; i < view.segments().size(); ++i) {
    const Segment& vs = view.segments()[i];
    auto it = by_name.find(vs.name);
    if (it == by_name.end())
      throw InvalidArgument("assign_view: unknown segment '" + vs.name + "'");
    const Segment& dst = segments_[it->second];
    if (dst.length != vs.length)
      throw InvalidArgument("assign_view: segment length mismatch for '" + vs.name + "'");
    std::copy_n(view.values().begin() + static_cast<std::ptrdiff_t>(vs.offset),
                vs.length, values_.begin() + static_cast<std::ptrdiff_t>(dst.offset));
  }
}

ParamVector ParamVector::zeros_like() const {
  return ParamVector(std::vector<double>(values_.size(), 0.0), segments_);
}

ParamVector reconstruct(const ParamVector& body, const ParamVector& head) {
  std::vector<double> vals;
  vals.reserve(body.size() + head.size());
  vals.insert(vals.end(), body.values().begin(), body.values().end());
  vals.insert(vals.end(), head.values().begin(), head.values().end());
  std::vector<Segment> segs;
  std::size_t off = 0;
  for (const Segment& s : body.segments()) {
    segs.push_back({s.name, off, s.length, s.tag});
    off += s.length;
  }
  for (const Segment& s : head.segments()) {
    segs.push_back({s.name, off, s.length, s.tag});
    off += s.length;
  }
  return ParamVector(std::move(vals), std::move(segs));
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1];
    n += static_cast<std::size_t>(layer_sizes[l + 1]);
  }
  return n;
}

MlpModel::MlpModel(MlpSpec spec, ParamVector params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  if (spec_.layer_sizes.size() < 2)
    throw InvalidArgument("MlpModel: need at least input and output layer sizes");
  if (params_.size() != spec_.param_count())
    throw InvalidArgument("MlpModel: parameter vector does not match layer sizes");
}

namespace {

std::vector<Segment> mlp_segments(const MlpSpec& spec) {
  std::vector<Segment> segs;
  std::size_t off = 0;
  std::size_t layers = spec.layer_sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    SplitTag tag = (l + 1 == layers) ? SplitTag::kHead : SplitTag::kBody;
    std::size_t wlen =
        static_cast<std::size_t>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1];
    std::size_t blen = static_cast<std::size_t>(spec.layer_sizes[l + 1]);
    segs.push_back({"fc" + std::to_string(l) + ".weight", off, wlen, tag});
    off += wlen;
    segs.push_back({"fc" + std::to_string(l) + ".bias", off, blen, tag});
    off += blen;
  }
  return segs;
}

}  // namespace

ParamVector MlpModel::init_params(const MlpSpec& spec, RngStream& rng) {
  std::vector<Segment> segs = mlp_segments(spec);
  std::vector<double> vals(spec.param_count());
  std::size_t idx = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(spec.layer_sizes[l]));
    std::size_t n = static_cast<std::size_t>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1] +
                    static_cast<std::size_t>(spec.layer_sizes[l + 1]);
    for (std::size_t i = 0; i < n; ++i)
      vals[idx++] = (2.0 * rng.next_double() - 1.0) * bound;
  }
  return ParamVector(std::move(vals), std::move(segs));
}

ParamVector MlpModel::zero_params(const MlpSpec& spec) {
  return ParamVector(std::vector<double>(spec.param_count(), 0.0), mlp_segments(spec));
}

Matrix MlpModel::forward(const Matrix& batch, ForwardCache* cache) const {
  if (batch.cols != static_cast<std::size_t>(spec_.input_dim()))
    throw InvalidArgument("forward: batch feature dimension mismatch");
  if (!all_finite(batch.values)) throw NumericFault("forward: non-finite input");

  if (cache) {
    cache->input = batch;
    cache->activations.clear();
  }

  const std::size_t layers = spec_.layer_sizes.size() - 1;
  Matrix act = batch;
  std::size_t seg = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t din = static_cast<std::size_t>(spec_.layer_sizes[l]);
    const std::size_t dout = static_cast<std::size_t>(spec_.layer_sizes[l + 1]);
    std::span<const double> w = params_.segment_span(seg++);
    std::span<const double> b = params_.segment_span(seg++);
    Matrix z(act.rows, dout);
    for (std::size_t i = 0; i < act.rows; ++i) {
      const double* arow = act.values.data() + i * act.cols;
      double* zrow = z.values.data() + i * dout;
      for (std::size_t j = 0; j < dout; ++j) zrow[j] = b[j];
      for (std::size_t k = 0; k < din; ++k) {
        double a = arow[k];
        if (a == 0.0) continue;
        const double* wrow = w.data() + k * dout;
        for (std::size_t j = 0; j < dout; ++j) zrow[j] += a * wrow[j];
      }
    }
    if (l + 1 < layers) {
      for (double& x : z.values) x = x > 0.0 ? x : 0.0;  // ReLU
      if (cache) cache->activations.push_back(z);
      act = std::move(z);
    } else {
      // softmax rows, max-shifted
      for (std::size_t i = 0; i < z.rows; ++i) {
        double* row = z.values.data() + i * z.cols;
        double mx = row[0];
        for (std::size_t j = 1; j < z.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < z.cols; ++j) {
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        for (std::size_t j = 0; j < z.cols; ++j) row[j] /= sum;
      }
      act = std::move(z);
    }
  }
  if (cache) cache->probabilities = act;
  return act;
}

ParamVector MlpModel::backward_from_dlogits(const ForwardCache& cache,
                                            const Matrix& dlogits) const {
  const std::size_t layers = spec_.layer_sizes.size() - 1;
  ParamVector grads = params_.zeros_like();

  Matrix delta = dlogits;  // gradient at layer output (pre-activation)
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& input =
        (l == 0) ? cache.input : cache.activations[l - 1];
    std::span<const double> w = params_.segment_span(2 * l);
    std::span<double> gw = grads.segment_span(2 * l);
    std::span<double> gb = grads.segment_span(2 * l + 1);

    // dW = input^T * delta, db = column sums of delta
    const std::size_t din = input.cols;
    const std::size_t dout = delta.cols;
    for (std::size_t i = 0; i < input.rows; ++i) {
      const double* arow = input.values.data() + i * din;
      const double* drow = delta.values.data() + i * dout;
      for (std::size_t k = 0; k < din; ++k) {
        double a = arow[k];
        if (a == 0.0) continue;
        double* grow = gw.data() + k * dout;
        for (std::size_t j = 0; j < dout; ++j) grow[j] += a * drow[j];
      }
      for (std::size_t j = 0; j < dout; ++j) gb[j] += drow[j];
    }

    if (l == 0) break;
    // delta_prev = (delta * W^T) . relu'(activation)
    Matrix prev(delta.rows, din);
    for (std::size_t i = 0; i < delta.rows; ++i) {
      const double* drow = delta.values.data() + i * dout;
      double* prow = prev.values.data() + i * din;
      for (std::size_t k = 0; k < din; ++k) {
        const double* wrow = w.data() + k * dout;
        double s = 0.0;
        for (std::size_t j = 0; j < dout; ++j) s += drow[j] * wrow[j];
        prow[k] = s;
      }
    }
    const Matrix& act = cache.activations[l - 1];
    for (std::size_t i = 0; i < prev.values.size(); ++i)
      if (act.values[i] <= 0.0) prev.values[i] = 0.0;
    delta = std::move(prev);
  }
  return grads;
}

double ce_loss(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows != labels.size())
    throw InvalidArgument("ce_loss: batch/label count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols)
      throw InvalidArgument("ce_loss: label out of range");
    double p = std::max(probs.at(i, static_cast<std::size_t>(y)), 1e-300);
    total -= std::log(p);
  }
  return total / static_cast<double>(probs.rows);
}

Matrix ce_dlogits(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows != labels.size())
    throw InvalidArgument("ce_dlogits: batch/label count mismatch");
  Matrix d = probs;
  const double inv_b = 1.0 / static_cast<double>(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols)
      throw InvalidArgument("ce_dlogits: label out of range");
    d.at(i, static_cast<std::size_t>(y)) -= 1.0;
  }
  for (double& x : d.values) x *= inv_b;
  return d;
}

std::pair<double, ParamVector> backward_ce(const MlpModel& model,
                                           const ForwardCache& cache,
                                           std::span<const int> labels) {
  double loss = ce_loss(cache.probabilities, labels);
  Matrix d = ce_dlogits(cache.probabilities, labels);
  return {loss, model.backward_from_dlogits(cache, d)};
}

KlResult kl_grad(const Matrix& student_probs, const Matrix& teacher_probs) {
  if (student_probs.rows != teacher_probs.rows ||
      student_probs.cols != teacher_probs.cols)
    throw InvalidArgument("kl_grad: shape mismatch");
  KlResult r;
  r.dlogits_student = Matrix(student_probs.rows, student_probs.cols);
  const double inv_b = 1.0 / static_cast<double>(student_probs.rows);
  double total = 0.0;
  for (std::size_t i = 0; i < student_probs.rows; ++i) {
    for (std::size_t j = 0; j < student_probs.cols; ++j) {
      double t = teacher_probs.at(i, j);
      double s = student_probs.at(i, j);
      if (t > 0.0) {
        if (s < 1e-12) {
          s = 1e-12;
          r.clamped = true;
        }
        total += t * (std::log(t) - std::log(s));
      }
      r.dlogits_student.at(i, j) = (student_probs.at(i, j) - t) * inv_b;
    }
  }
  r.value = total * inv_b;
  return r;
}

// ---------------------------------------------------------------------------
// ArchSpec
// ---------------------------------------------------------------------------

long long ArchSpec::param_count(Selector sel) const {
  long long n = 0;
  for (const ArchLayer& l : layers) {
    if (l.trainable_params < 0)
      throw InvalidArgument("ArchSpec: negative parameter count");
    if (selected(l.tag, sel)) n += l.trainable_params;
  }
  return n;
}

ArchSpec ArchSpec::parse(std::istream& in, const std::string& source_name) {
  ArchSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string trimmed = line;
    auto hash = trimmed.find('#');
    if (hash != std::string::npos) trimmed.erase(hash);
    std::istringstream ls(trimmed);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "name") {
      if (!(ls >> spec.name))
        throw FormatError(source_name + ":" + std::to_string(lineno) +
                          ": missing architecture name");
    } else if (key == "layer") {
      ArchLayer layer;
      std::string tag;
      if (!(ls >> layer.kind >> layer.trainable_params >> tag))
        throw FormatError(source_name + ":" + std::to_string(lineno) +
                          ": expected 'layer <kind> <params> <BODY|HEAD>'");
      if (layer.trainable_params < 0)
        throw FormatError(source_name + ":" + std::to_string(lineno) +
                          ": negative parameter count");
      if (tag == "BODY")
        layer.tag = SplitTag::kBody;
      else if (tag == "HEAD")
        layer.tag = SplitTag::kHead;
      else
        throw FormatError(source_name + ":" + std::to_string(lineno) +
                          ": unknown split tag '" + tag + "'");
      spec.layers.push_back(std::move(layer));
    } else {
      throw FormatError(source_name + ":" + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
    }
  }
  if (spec.name.empty())
    throw FormatError(source_name + ": missing 'name' line");
  if (spec.layers.empty())
    throw FormatError(source_name + ": no layers declared");
  return spec;
}

ArchSpec ArchSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open architecture spec");
  return parse(in, path);
}

std::string ArchSpec::serialize() const {
  std::ostringstream out;
  out << "name " << name << "\n";
  for (const ArchLayer& l : layers)
    out << "layer " << l.kind << " " << l.trainable_params << " "
        << to_string(l.tag) << "\n";
  return out.str();
}

namespace {

constexpr SplitTag B = SplitTag::kBody;
constexpr SplitTag H = SplitTag::kHead;

std::vector<ArchSpec> make_builtin_archs() {
  std::vector<ArchSpec> v;
  v.push_back({"femnist",
               {{"Input", 0, B},
                {"Conv2d", 320, B},
                {"Conv2d", 18496, B},
                {"MaxPool2d", 0, B},
                {"Dropout", 0, B},
                {"Flatten", 0, B},
                {"Linear", 1179776, B},
                {"Dropout", 0, B},
                {"Linear", 7998, H}}});
  v.push_back({"shakespeare",
               {{"Input", 0, B},
                {"Embedding", 720, B},
                {"LSTM", 798720, B},
                {"Linear", 23130, H}}});
  v.push_back({"sent140",
               {{"Input", 0, B},
                {"Embedding", 0, B},
                {"LSTM", 79360, B},
                {"Linear", 1290, B},
                {"Dropout", 0, B},
                {"Linear", 22, H}}});
  v.push_back({"mnist",
               {{"Input", 0, B},
                {"Conv2d", 320, B},
                {"Conv2d", 18496, B},
                {"MaxPool2d", 0, B},
                {"Dropout", 0, B},
                {"Flatten", 0, B},
                {"Linear", 1179776, B},
                {"Dropout", 0, B},
                {"Linear", 1290, H}}});
  // The CIFAR-10 VGG variant splits into conv features (BODY) and all linear
  // layers (HEAD).
  v.push_back({"cifar10",
               {{"Input", 0, B},
                {"Conv2d", 1792, B},
                {"Conv2d", 36928, B},
                {"MaxPool2d", 0, B},
                {"Conv2d", 73856, B},
                {"Conv2d", 147584, B},
                {"MaxPool2d", 0, B},
                {"Conv2d", 295168, B},
                {"Conv2d", 590080, B},
                {"MaxPool2d", 0, B},
                {"Conv2d", 1180160, B},
                {"Conv2d", 2359808, B},
                {"MaxPool2d", 0, B},
                {"Conv2d", 2359808, B},
                {"Conv2d", 2359808, B},
                {"MaxPool2d", 0, B},
                {"Dropout", 0, B},
                {"Linear", 262656, H},
                {"Dropout", 0, H},
                {"Linear", 262656, H},
                {"Linear", 5130, H}}});
  return v;
}

const std::vector<ArchSpec>& builtin_archs() {
  static const std::vector<ArchSpec> archs = make_builtin_archs();
  return archs;
}

}  // namespace

const ArchSpec& builtin_arch(const std::string& name) {
  for (const ArchSpec& a : builtin_archs())
    if (a.name == name) return a;
  throw InvalidArgument("unknown bundled architecture '" + name + "'");
}

const std::vector<std::string>& builtin_arch_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const ArchSpec& a : builtin_archs()) n.push_back(a.name);
    return n;
  }();
  return names;
}

ArchSpec arch_from_mlp(const MlpSpec& spec) {
  ArchSpec out;
  out.name = "mlp";
  std::size_t layers = spec.layer_sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    long long n = static_cast<long long>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1] +
                  spec.layer_sizes[l + 1];
    out.layers.push_back(
        {"Linear", n, (l + 1 == layers) ? SplitTag::kHead : SplitTag::kBody});
  }
  return out;
}

}  // namespace fedsim
