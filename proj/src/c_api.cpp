// SPDX-License-Identifier: Apache-2.0
#include "fedsim.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "fedsim/config.hpp"
#include "fedsim/report.hpp"

struct fedsim_config_s {
  fedsim::ParsedConfig pc;
};

namespace {

void copy_err(char* err, size_t err_len, const std::string& msg) {
  if (!err || err_len == 0) return;
  std::size_t n = std::min(msg.size(), err_len - 1);
  std::memcpy(err, msg.data(), n);
  err[n] = '\0';
}

template <typename Fn>
fedsim_status guarded(char* err, size_t err_len, Fn&& fn) {
  try {
    fn();
    return FEDSIM_OK;
  } catch (const fedsim::ConfigError& e) {
    copy_err(err, err_len, e.what());
    return FEDSIM_ERR_CONFIG;
  } catch (const fedsim::FormatError& e) {
    copy_err(err, err_len, e.what());
    return FEDSIM_ERR_FORMAT;
  } catch (const fedsim::NumericFault& e) {
    copy_err(err, err_len, e.what());
    return FEDSIM_ERR_NUMERIC;
  } catch (const fedsim::PartitionFailure& e) {
    copy_err(err, err_len, e.what());
    return FEDSIM_ERR_PARTITION;
  } catch (const fedsim::InvalidArgument& e) {
    copy_err(err, err_len, e.what());
    return FEDSIM_ERR_INVALID_ARGUMENT;
  } catch (const std::filesystem::filesystem_error& e) {
    copy_err(err, err_len, e.what());
    return FEDSIM_ERR_IO;
  } catch (const std::exception& e) {
    copy_err(err, err_len, e.what());
    return FEDSIM_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* fedsim_version(void) { return fedsim::tool_version(); }

const char* fedsim_status_name(fedsim_status status) {
  switch (status) {
    case FEDSIM_OK: return "ok";
    case FEDSIM_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case FEDSIM_ERR_CONFIG: return "config-error";
    case FEDSIM_ERR_FORMAT: return "format-error";
    case FEDSIM_ERR_NUMERIC: return "numeric-fault";
    case FEDSIM_ERR_PARTITION: return "partition-failure";
    case FEDSIM_ERR_IO: return "io-error";
    case FEDSIM_ERR_INTERNAL: return "internal-error";
  }
  return "unknown";
}

fedsim_status fedsim_config_create(fedsim_config_t** out_cfg) {
  if (!out_cfg) return FEDSIM_ERR_INVALID_ARGUMENT;
  *out_cfg = new (std::nothrow) fedsim_config_s();
  if (!*out_cfg) return FEDSIM_ERR_INTERNAL;
  (*out_cfg)->pc.methods = {(*out_cfg)->pc.cfg.method};
  return FEDSIM_OK;
}

fedsim_status fedsim_config_load(const char* path, fedsim_config_t** out_cfg,
                                 char* err, size_t err_len) {
  if (!path || !out_cfg) {
    copy_err(err, err_len, "null argument");
    return FEDSIM_ERR_INVALID_ARGUMENT;
  }
  *out_cfg = nullptr;
  fedsim::ParsedConfig pc;
  fedsim_status st = guarded(err, err_len, [&] { pc = fedsim::load_config_file(path); });
  if (st != FEDSIM_OK) return st;
  *out_cfg = new (std::nothrow) fedsim_config_s{std::move(pc)};
  return *out_cfg ? FEDSIM_OK : FEDSIM_ERR_INTERNAL;
}

fedsim_status fedsim_config_set(fedsim_config_t* cfg, const char* key,
                                const char* value, char* err, size_t err_len) {
  if (!cfg || !key || !value) {
    copy_err(err, err_len, "null argument");
    return FEDSIM_ERR_INVALID_ARGUMENT;
  }
  return guarded(err, err_len, [&] {
    fedsim::apply_config_entry(cfg->pc, key, value, std::string("<set>:") + key);
    fedsim::validate(cfg->pc.cfg);
  });
}

void fedsim_config_free(fedsim_config_t* cfg) { delete cfg; }

fedsim_status fedsim_run(const fedsim_config_t* cfg, const char* out_dir,
                         char* err, size_t err_len) {
  if (!cfg) {
    copy_err(err, err_len, "null configuration");
    return FEDSIM_ERR_INVALID_ARGUMENT;
  }
  std::string dir = (out_dir && *out_dir) ? out_dir : cfg->pc.out_dir;
  if (dir.empty()) {
    copy_err(err, err_len, "no output directory (set out_dir in the config or pass one)");
    return FEDSIM_ERR_CONFIG;
  }
  return guarded(err, err_len, [&] { fedsim::cmd_run(cfg->pc, dir); });
}

fedsim_status fedsim_sweep(const fedsim_config_t* cfg, const char* axis,
                           const char* values_csv, const char* out_dir,
                           char* err, size_t err_len) {
  if (!cfg || !axis || !values_csv) {
    copy_err(err, err_len, "null argument");
    return FEDSIM_ERR_INVALID_ARGUMENT;
  }
  std::string dir = (out_dir && *out_dir) ? out_dir : cfg->pc.out_dir;
  if (dir.empty()) {
    copy_err(err, err_len, "no output directory (set out_dir in the config or pass one)");
    return FEDSIM_ERR_CONFIG;
  }
  return guarded(err, err_len, [&] {
    fedsim::SweepSpec spec = fedsim::parse_sweep_spec(axis, values_csv);
    fedsim::cmd_sweep(cfg->pc, spec, dir);
  });
}

fedsim_status fedsim_traffic_report(const char* arch_name_or_path,
                                    int include_bytes, char** out_csv,
                                    char* err, size_t err_len) {
  if (!arch_name_or_path || !out_csv) {
    copy_err(err, err_len, "null argument");
    return FEDSIM_ERR_INVALID_ARGUMENT;
  }
  *out_csv = nullptr;
  return guarded(err, err_len, [&] {
    std::string name(arch_name_or_path);
    const auto& names = fedsim::builtin_arch_names();
    fedsim::ArchSpec arch;
    if (std::find(names.begin(), names.end(), name) != names.end())
      arch = fedsim::builtin_arch(name);
    else
      arch = fedsim::ArchSpec::load(name);
    std::string csv = fedsim::traffic_csv(arch, include_bytes != 0);
    *out_csv = dup_string(csv);
    if (!*out_csv) throw std::bad_alloc();
  });
}

fedsim_status fedsim_plotdata(const char* results_dir, char** out_csv,
                              char* err, size_t err_len) {
  if (!results_dir || !out_csv) {
    copy_err(err, err_len, "null argument");
    return FEDSIM_ERR_INVALID_ARGUMENT;
  }
  *out_csv = nullptr;
  return guarded(err, err_len, [&] {
    std::string csv = fedsim::plotdata_csv(results_dir);
    *out_csv = dup_string(csv);
    if (!*out_csv) throw std::bad_alloc();
  });
}

void fedsim_string_free(char* s) { std::free(s); }

}  // extern "C"
