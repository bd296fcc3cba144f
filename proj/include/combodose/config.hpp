#pragma once

// JSON configuration and scenario files. Keys mirror the domain field
// names; unknown keys are rejected so a mistyped safety constant cannot be
// silently ignored.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "combodose/scenario.hpp"
#include "combodose/simulation.hpp"

namespace combodose {

struct DesignConfig {
  DesignConstants constants;
  std::vector<double> raw_x{1.0, 2.0, 3.0, 4.0};
  std::vector<double> raw_y{1.0, 2.0, 3.0, 4.0};
  UtilityTradeoff tradeoff;
  McmcConfig mcmc;
  int lattice_resolution = 101;

  StandardDoseGrid grid() const;
  SimulationDesign simulation_design() const;
  // Throws ConfigError listing every invalid field.
  void validate() const;
};

struct RunConfig {
  DesignConfig design;
  std::string scenario_path;  // resolved against the config file's directory
  int trials = 200;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int workers = 1;
};

// `allowed_extra` lists additional top-level keys the caller handles.
DesignConfig parse_design_config(const nlohmann::json& j,
                                 const std::vector<std::string>& allowed_extra = {});
nlohmann::json to_json(const DesignConfig& d);

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& r);

Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const Scenario& s);

// Reads a whole file into a JSON document; ConfigError if missing or malformed.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace combodose
