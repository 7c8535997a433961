// SPDX-License-Identifier: Apache-2.0
#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace fedsim {

Dataset take(const Dataset& d, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.classes = d.classes;
  out.x = Matrix(indices.size(), d.dim());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::size_t src = indices[i];
    if (src >= d.size()) throw InvalidArgument("take: index out of range");
    std::copy_n(d.x.values.begin() + static_cast<std::ptrdiff_t>(src * d.dim()),
                d.dim(), out.x.values.begin() + static_cast<std::ptrdiff_t>(i * d.dim()));
    out.labels[i] = d.labels[src];
  }
  return out;
}

Dataset generate_synthetic(int classes, int dim, std::size_t samples,
                           double separation, double noise, RngStream& rng) {
  if (classes < 2 || dim < 1 || samples < static_cast<std::size_t>(classes))
    throw InvalidArgument("generate_synthetic: need classes >= 2, dim >= 1, samples >= classes");
  if (separation < 0.0 || noise < 0.0)
    throw InvalidArgument("generate_synthetic: separation and noise must be nonnegative");

  Matrix means(static_cast<std::size_t>(classes), static_cast<std::size_t>(dim));
  for (double& m : means.values) m = separation * rng.next_gaussian();

  Dataset d;
  d.classes = classes;
  d.x = Matrix(samples, static_cast<std::size_t>(dim));
  d.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    int y = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes)));
    d.labels[i] = y;
    const double* mu = means.values.data() + static_cast<std::size_t>(y) * dim;
    double* row = d.x.values.data() + i * static_cast<std::size_t>(dim);
    for (int j = 0; j < dim; ++j) row[j] = mu[j] + noise * rng.next_gaussian();
  }
  return d;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& d) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.classes));
  for (std::size_t i = 0; i < d.size(); ++i) {
    int y = d.labels[i];
    if (y < 0 || y >= d.classes)
      throw InvalidArgument("partition: label out of range");
    by_class[static_cast<std::size_t>(y)].push_back(i);
  }
  return by_class;
}

void allocate_class(const std::vector<std::size_t>& class_indices,
                    const std::vector<double>& proportions, RngStream& rng,
                    std::vector<std::vector<std::size_t>>& out) {
  std::vector<std::size_t> shuffled = class_indices;
  rng.shuffle(shuffled);
  for (std::size_t idx : shuffled) {
    double u = rng.next_double();
    double acc = 0.0;
    std::size_t client = proportions.size() - 1;
    for (std::size_t s = 0; s < proportions.size(); ++s) {
      acc += proportions[s];
      if (u < acc) {
        client = s;
        break;
      }
    }
    out[client].push_back(idx);
  }
}

}  // namespace

PartitionPlan partition_dirichlet(const Dataset& train, const Dataset& test,
                                  int clients, double alpha_label,
                                  RngStream& rng) {
  if (clients < 1) throw InvalidArgument("partition_dirichlet: need at least one client");
  if (!(alpha_label > 0.0))
    throw InvalidArgument("partition_dirichlet: alpha_label must be positive");
  if (train.classes != test.classes)
    throw InvalidArgument("partition_dirichlet: train/test class counts differ");

  auto train_by_class = indices_by_class(train);
  auto test_by_class = indices_by_class(test);
  const std::size_t s = static_cast<std::size_t>(clients);

  for (int attempt = 1; attempt <= 100; ++attempt) {
    PartitionPlan plan;
    plan.train_indices.assign(s, {});
    plan.test_indices.assign(s, {});
    plan.class_proportions.clear();
    plan.attempts = attempt;
    for (int c = 0; c < train.classes; ++c) {
      std::vector<double> p = dirichlet_sample(alpha_label, s, rng);
      allocate_class(train_by_class[static_cast<std::size_t>(c)], p, rng,
                     plan.train_indices);
      allocate_class(test_by_class[static_cast<std::size_t>(c)], p, rng,
                     plan.test_indices);
      plan.class_proportions.push_back(std::move(p));
    }
    bool ok = true;
    for (const auto& lst : plan.train_indices)
      if (lst.empty()) ok = false;
    if (!ok) continue;
    for (auto& lst : plan.train_indices) std::sort(lst.begin(), lst.end());
    for (auto& lst : plan.test_indices) std::sort(lst.begin(), lst.end());
    return plan;
  }
  std::ostringstream msg;
  msg << "partition_dirichlet: a client received zero train samples in all 100 attempts"
      << " (clients=" << clients << ", alpha=" << alpha_label
      << ", train=" << train.size() << ")";
  throw PartitionFailure(msg.str());
}

std::string PartitionPlan::to_json() const {
  nlohmann::ordered_json j;
  j["attempts"] = attempts;
  j["class_proportions"] = class_proportions;
  j["train_indices"] = train_indices;
  j["test_indices"] = test_indices;
  return j.dump(2);
}

Dataset subsample_ratio(const Dataset& d, double ratio, RngStream& rng) {
  if (!(ratio > 0.0) || ratio > 1.0)
    throw InvalidArgument("subsample_ratio: ratio must be in (0, 1]");
  if (ratio == 1.0) return d;
  std::size_t m = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(d.size())));
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  // partial Fisher-Yates: the first m entries are a uniform sample
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return take(d, idx);
}

TrainValSplit split_train_val(const Dataset& d, int train_parts, int val_parts,
                              RngStream& rng) {
  if (train_parts < 1 || val_parts < 0)
    throw InvalidArgument("split_train_val: bad ratio");
  TrainValSplit out;
  if (d.size() < 2) {
    out.train = d;
    out.validation.classes = d.classes;
    out.validation.x = Matrix(0, d.dim());
    out.degenerate = true;
    return out;
  }
  std::size_t n_val = d.size() * static_cast<std::size_t>(val_parts) /
                      static_cast<std::size_t>(train_parts + val_parts);
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  out.train = take(d, train_idx);
  out.validation = take(d, val_idx);
  return out;
}

UnlabeledExtract extract_unlabeled(const Dataset& pool, std::size_t n,
                                   RngStream& rng) {
  UnlabeledExtract out;
  std::size_t m = n;
  if (m > pool.size()) {
    m = pool.size();
    out.short_pool = true;
  }
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::size_t> taken(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
  std::vector<std::size_t> rest(idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end());
  std::sort(taken.begin(), taken.end());
  std::sort(rest.begin(), rest.end());
  Dataset extracted = take(pool, taken);
  out.unlabeled = std::move(extracted.x);
  out.remaining = take(pool, rest);
  return out;
}

// ---------------------------------------------------------------------------
// IDX
// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path,
                        std::size_t offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
    throw FormatError(path + ": truncated at byte " + std::to_string(offset));
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

struct IdxHeader {
  int dims = 0;
  std::vector<std::uint32_t> shape;
};

IdxHeader read_idx_header(std::istream& in, const std::string& path) {
  unsigned char magic[4];
  in.read(reinterpret_cast<char*>(magic), 4);
  if (!in) throw FormatError(path + ": truncated at byte 0 (missing magic)");
  if (magic[0] != 0 || magic[1] != 0)
    throw FormatError(path + ": bad magic at byte 0");
  if (magic[2] != 0x08)
    throw FormatError(path + ": unsupported type byte at byte 2 (only ubyte supported)");
  IdxHeader h;
  h.dims = magic[3];
  if (h.dims < 1 || h.dims > 3)
    throw FormatError(path + ": unsupported dimension count at byte 3");
  for (int i = 0; i < h.dims; ++i)
    h.shape.push_back(read_be32(in, path, 4 + 4 * static_cast<std::size_t>(i)));
  return h;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError(images_path + ": cannot open");
  IdxHeader ih = read_idx_header(img, images_path);
  if (ih.dims < 2)
    throw FormatError(images_path + ": image file needs at least 2 dimensions");
  std::size_t n = ih.shape[0];
  std::size_t row = 1;
  for (int i = 1; i < ih.dims; ++i) row *= ih.shape[static_cast<std::size_t>(i)];
  std::vector<unsigned char> buf(n * row);
  std::size_t header = 4 + 4 * static_cast<std::size_t>(ih.dims);
  img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(img.gcount()) != buf.size())
    throw FormatError(images_path + ": truncated at byte " +
                      std::to_string(header + static_cast<std::size_t>(img.gcount())));

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError(labels_path + ": cannot open");
  IdxHeader lh = read_idx_header(lab, labels_path);
  if (lh.dims != 1)
    throw FormatError(labels_path + ": label file must be 1-dimensional");
  if (lh.shape[0] != n)
    throw FormatError(labels_path + ": label count does not match image count");
  std::vector<unsigned char> lbuf(n);
  lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(lab.gcount()) != n)
    throw FormatError(labels_path + ": truncated at byte " +
                      std::to_string(8 + static_cast<std::size_t>(lab.gcount())));

  Dataset d;
  d.x = Matrix(n, row);
  for (std::size_t i = 0; i < buf.size(); ++i)
    d.x.values[i] = static_cast<double>(buf[i]) / 255.0;
  d.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = lbuf[i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.classes = max_label + 1;
  return d;
}

void save_idx(const Dataset& d, const std::string& images_path,
              const std::string& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw FormatError(images_path + ": cannot open for writing");
  unsigned char magic[4] = {0, 0, 0x08, 2};
  img.write(reinterpret_cast<char*>(magic), 4);
  write_be32(img, static_cast<std::uint32_t>(d.size()));
  write_be32(img, static_cast<std::uint32_t>(d.dim()));
  for (double v : d.x.values) {
    double c = std::clamp(v, 0.0, 1.0);
    unsigned char b = static_cast<unsigned char>(std::lround(c * 255.0));
    img.write(reinterpret_cast<char*>(&b), 1);
  }

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError(labels_path + ": cannot open for writing");
  unsigned char lmagic[4] = {0, 0, 0x08, 1};
  lab.write(reinterpret_cast<char*>(lmagic), 4);
  write_be32(lab, static_cast<std::uint32_t>(d.size()));
  for (int y : d.labels) {
    unsigned char b = static_cast<unsigned char>(y);
    lab.write(reinterpret_cast<char*>(&b), 1);
  }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  if (line.rfind("label", 0) != 0)
    throw FormatError(path + ":1: expected header starting with 'label'");
  std::size_t cols = static_cast<std::size_t>(
      std::count(line.begin(), line.end(), ',')); // features
  Dataset d;
  std::vector<double> values;
  int lineno = 1;
  int max_label = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    if (!std::getline(ls, cell, ','))
      throw FormatError(path + ":" + std::to_string(lineno) + ": missing label");
    int y = std::stoi(cell);
    if (y < 0)
      throw FormatError(path + ":" + std::to_string(lineno) + ": negative label");
    d.labels.push_back(y);
    max_label = std::max(max_label, y);
    std::size_t got = 0;
    while (std::getline(ls, cell, ',')) {
      values.push_back(std::stod(cell));
      ++got;
    }
    if (got != cols)
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": expected " + std::to_string(cols) + " features, got " +
                        std::to_string(got));
  }
  d.x.rows = d.labels.size();
  d.x.cols = cols;
  d.x.values = std::move(values);
  d.classes = max_label + 1;
  return d;
}

void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << "label";
  for (std::size_t j = 0; j < d.dim(); ++j) out << ",f" << j;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.labels[i];
    for (std::size_t j = 0; j < d.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", d.x.at(i, j));
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace fedsim
