// SPDX-License-Identifier: Apache-2.0
#include "fedsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace fedsim {

const char* tool_version() { return "0.1.0"; }

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  }
}

double parse_real(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v, const std::string& where) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  std::istringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) throw ConfigError(where + ": empty list entry");
    out.push_back(static_cast<int>(parse_int(cell, where)));
  }
  return out;
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void apply_config_entry(ParsedConfig& pc, const std::string& key,
                        const std::string& value, const std::string& where) {
  FederationConfig& c = pc.cfg;
  if (key == "method") {
    pc.methods.clear();
    std::istringstream ss(value);
    std::string m;
    while (std::getline(ss, m, ',')) {
      m = trim(m);
      if (!is_known_method(m))
        throw ConfigError(where + ": unknown method '" + m + "'");
      pc.methods.push_back(m);
    }
    if (pc.methods.empty()) throw ConfigError(where + ": empty method list");
    c.method = pc.methods.front();
  } else if (key == "clients") {
    c.clients = static_cast<int>(parse_int(value, where));
  } else if (key == "rounds") {
    c.rounds = static_cast<int>(parse_int(value, where));
    if (c.rounds < 1) throw ConfigError(where + ": rounds must be at least 1");
  } else if (key == "local_epochs") {
    c.local_epochs = static_cast<int>(parse_int(value, where));
  } else if (key == "batch_size") {
    c.batch_size = static_cast<int>(parse_int(value, where));
  } else if (key == "learning_rate") {
    c.learning_rate = parse_real(value, where);
  } else if (key == "data_ratio") {
    c.data_ratio = parse_real(value, where);
  } else if (key == "alpha_label") {
    c.alpha_label = parse_real(value, where);
  } else if (key == "repeats") {
    c.repeats = static_cast<int>(parse_int(value, where));
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(parse_int(value, where));
  } else if (key == "fine_tune") {
    c.fine_tune = parse_bool(value, where);
  } else if (key == "ft_epochs") {
    c.ft_epochs = static_cast<int>(parse_int(value, where));
  } else if (key == "ft_learning_rate") {
    c.ft_learning_rate = parse_real(value, where);
  } else if (key == "threads") {
    c.threads = static_cast<int>(parse_int(value, where));
  } else if (key == "dataset") {
    c.dataset = value;
  } else if (key == "classes") {
    c.classes = static_cast<int>(parse_int(value, where));
  } else if (key == "features") {
    c.features = static_cast<int>(parse_int(value, where));
  } else if (key == "samples") {
    long long n = parse_int(value, where);
    if (n < 0) throw ConfigError(where + ": samples must be nonnegative");
    c.samples = static_cast<std::size_t>(n);
  } else if (key == "class_separation") {
    c.class_separation = parse_real(value, where);
  } else if (key == "noise") {
    c.noise = parse_real(value, where);
  } else if (key == "test_fraction") {
    c.test_fraction = parse_real(value, where);
  } else if (key == "train_val_ratio") {
    auto colon = value.find(':');
    if (colon == std::string::npos)
      throw ConfigError(where + ": expected '<train>:<val>', got '" + value + "'");
    c.split_train_part =
        static_cast<int>(parse_int(trim(value.substr(0, colon)), where));
    c.split_val_part =
        static_cast<int>(parse_int(trim(value.substr(colon + 1)), where));
  } else if (key == "hidden") {
    c.hidden = parse_int_list(value, where);
  } else if (key == "train_images") {
    c.train_images = value;
  } else if (key == "train_labels") {
    c.train_labels = value;
  } else if (key == "test_images") {
    c.test_images = value;
  } else if (key == "test_labels") {
    c.test_labels = value;
  } else if (key == "train_csv") {
    c.train_csv = value;
  } else if (key == "test_csv") {
    c.test_csv = value;
  } else if (key == "fedprox_mu") {
    c.fedprox_mu = parse_real(value, where);
  } else if (key == "hypcluster_k") {
    c.hypcluster_k = static_cast<int>(parse_int(value, where));
  } else if (key == "fml_beta") {
    c.fml_beta = parse_real(value, where);
  } else if (key == "fedme_beta") {
    c.fedme_beta = parse_real(value, where);
  } else if (key == "fedme_distill_weight") {
    c.fedme_distill_weight = parse_real(value, where);
  } else if (key == "fedme_cluster_schedule") {
    c.fedme_cluster_schedule = parse_int_list(value, where);
  } else if (key == "fedme_unlabeled") {
    long long n = parse_int(value, where);
    if (n < 0) throw ConfigError(where + ": fedme_unlabeled must be nonnegative");
    c.fedme_unlabeled = static_cast<std::size_t>(n);
  } else if (key == "ditto_lambda") {
    c.ditto_lambda = parse_real(value, where);
  } else if (key == "pfedme_lambda") {
    c.pfedme_lambda = parse_real(value, where);
  } else if (key == "pfedme_k") {
    c.pfedme_k = static_cast<int>(parse_int(value, where));
  } else if (key == "pfedme_inner_lr") {
    c.pfedme_inner_lr = parse_real(value, where);
  } else if (key == "fedrep_head_epochs") {
    c.fedrep_head_epochs = static_cast<int>(parse_int(value, where));
  } else if (key == "fedrep_body_epochs") {
    c.fedrep_body_epochs = static_cast<int>(parse_int(value, where));
  } else if (key == "dump_partition") {
    c.dump_partition = parse_bool(value, where);
  } else if (key == "out_dir") {
    pc.out_dir = value;
  } else {
    throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

ParsedConfig parse_config_text(const std::string& text,
                               const std::string& source_name) {
  ParsedConfig pc;
  pc.methods = {pc.cfg.method};
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string where = source_name + ":" + std::to_string(lineno);
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    apply_config_entry(pc, key, value, where);
  }
  try {
    validate(pc.cfg);
  } catch (const InvalidArgument& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  return pc;
}

ParsedConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string config_snapshot(const ParsedConfig& pc) {
  const FederationConfig& c = pc.cfg;
  std::ostringstream out;
  out << "# fedsim " << tool_version() << " resolved configuration (schema "
      << kSchemaVersion << ")\n";
  std::string methods;
  for (std::size_t i = 0; i < pc.methods.size(); ++i) {
    if (i) methods += ",";
    methods += pc.methods[i];
  }
  out << "method = " << methods << "\n";
  out << "clients = " << c.clients << "\n";
  out << "rounds = " << c.rounds << "\n";
  out << "local_epochs = " << c.local_epochs << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "learning_rate = " << fmt_real(c.learning_rate) << "\n";
  out << "data_ratio = " << fmt_real(c.data_ratio) << "\n";
  out << "alpha_label = " << fmt_real(c.alpha_label) << "\n";
  out << "repeats = " << c.repeats << "\n";
  out << "seed = " << c.seed << "\n";
  out << "fine_tune = " << (c.fine_tune ? "true" : "false") << "\n";
  out << "ft_epochs = " << c.ft_epochs << "\n";
  out << "ft_learning_rate = " << fmt_real(c.ft_learning_rate) << "\n";
  out << "threads = " << c.threads << "\n";
  out << "dataset = " << c.dataset << "\n";
  out << "classes = " << c.classes << "\n";
  out << "features = " << c.features << "\n";
  out << "samples = " << c.samples << "\n";
  out << "class_separation = " << fmt_real(c.class_separation) << "\n";
  out << "noise = " << fmt_real(c.noise) << "\n";
  out << "test_fraction = " << fmt_real(c.test_fraction) << "\n";
  out << "train_val_ratio = " << c.split_train_part << ":" << c.split_val_part << "\n";
  out << "hidden = " << join_ints(c.hidden) << "\n";
  out << "train_images = " << c.train_images << "\n";
  out << "train_labels = " << c.train_labels << "\n";
  out << "test_images = " << c.test_images << "\n";
  out << "test_labels = " << c.test_labels << "\n";
  out << "train_csv = " << c.train_csv << "\n";
  out << "test_csv = " << c.test_csv << "\n";
  out << "fedprox_mu = " << fmt_real(c.fedprox_mu) << "\n";
  out << "hypcluster_k = " << c.hypcluster_k << "\n";
  out << "fml_beta = " << fmt_real(c.fml_beta) << "\n";
  out << "fedme_beta = " << fmt_real(c.fedme_beta) << "\n";
  out << "fedme_distill_weight = " << fmt_real(c.fedme_distill_weight) << "\n";
  out << "fedme_cluster_schedule = " << join_ints(c.fedme_cluster_schedule) << "\n";
  out << "fedme_unlabeled = " << c.fedme_unlabeled << "\n";
  out << "ditto_lambda = " << fmt_real(c.ditto_lambda) << "\n";
  out << "pfedme_lambda = " << fmt_real(c.pfedme_lambda) << "\n";
  out << "pfedme_k = " << c.pfedme_k << "\n";
  out << "pfedme_inner_lr = " << fmt_real(c.pfedme_inner_lr) << "\n";
  out << "fedrep_head_epochs = " << c.fedrep_head_epochs << "\n";
  out << "fedrep_body_epochs = " << c.fedrep_body_epochs << "\n";
  out << "dump_partition = " << (c.dump_partition ? "true" : "false") << "\n";
  out << "out_dir = " << pc.out_dir << "\n";
  return out.str();
}

SweepSpec parse_sweep_spec(const std::string& axis, const std::string& values_csv) {
  SweepSpec spec;
  spec.axis = axis;
  if (axis != "clients" && axis != "data_ratio" && axis != "alpha_label" &&
      axis != "learning_rate")
    throw ConfigError("sweep: unknown axis '" + axis +
                      "' (expected clients, data_ratio, alpha_label, or learning_rate)");
  std::istringstream ss(values_csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) continue;
    spec.values.push_back(parse_real(cell, "sweep values"));
  }
  if (spec.values.empty()) throw ConfigError("sweep: no values given");
  return spec;
}

void check_sweep_grid(const SweepSpec& spec, std::vector<std::string>& warnings) {
  static const std::map<std::string, std::vector<double>> grids = {
      {"clients", {5, 10, 20, 100}},
      {"data_ratio", {0.25, 0.5, 0.75, 1.0}},
      {"alpha_label", {0.1, 0.5, 1.0, 5.0}},
      {"learning_rate",
       {1e-3, std::pow(10.0, -2.5), 1e-2, std::pow(10.0, -1.5), 1e-1,
        std::pow(10.0, -0.5), 1.0, std::pow(10.0, 0.5)}},
  };
  const auto& grid = grids.at(spec.axis);
  for (double v : spec.values) {
    bool known = false;
    for (double g : grid)
      if (std::abs(v - g) <= 1e-9 * std::max(1.0, std::abs(g))) known = true;
    if (!known)
      warnings.push_back("sweep value " + fmt_real(v) + " is outside the default " +
                         spec.axis + " grid");
  }
}

}  // namespace fedsim
