// SPDX-License-Identifier: Apache-2.0
//
// Benchmark-scale trend check for the sweep command (slow-ish; run by ctest).

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "fedsim/report.hpp"

using namespace fedsim;
namespace fs = std::filesystem;

TEST_CASE("alpha sweep: fedper gains accuracy as heterogeneity grows") {
  std::string text =
      "method = fedper\n"
      "clients = 10\n"
      "rounds = 30\n"
      "repeats = 10\n"
      "seed = 42\n";
  ParsedConfig pc = parse_config_text(text, "sweep.cfg");
  fs::path dir = fs::temp_directory_path() / "fedsim_trend_sweep";
  fs::remove_all(dir);
  cmd_sweep(pc, parse_sweep_spec("alpha_label", "5.0,0.1"), dir.string());

  auto per_repeat = [&](const std::string& sub) {
    std::ifstream in(dir / sub / "summary.json");
    REQUIRE(in);
    nlohmann::json j = nlohmann::json::parse(in);
    return j.at("test_accuracy").at("per_repeat").get<std::vector<double>>();
  };
  std::vector<double> skewed = per_repeat("fedper_alpha_label_0.1");
  std::vector<double> uniform = per_repeat("fedper_alpha_label_5");
  REQUIRE(skewed.size() == 10);
  REQUIRE(uniform.size() == 10);
  int wins = 0;
  for (int s = 0; s < 10; ++s)
    if (skewed[static_cast<std::size_t>(s)] > uniform[static_cast<std::size_t>(s)]) ++wins;
  CHECK(wins >= 8);
  CHECK(fs::exists(dir / "combined.csv"));
  fs::remove_all(dir);
}
