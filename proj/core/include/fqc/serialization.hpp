#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fqc/fqi.hpp"
#include "fqc/mdp.hpp"

namespace fqc {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SweepSpec {
    std::vector<int> sample_grid;
    int seeds = 5;
};

struct ExperimentConfig {
    TabularMDP mdp;
    int feature_dim = 4;
    std::uint64_t seed = 0;
    FqiSchedule schedule;
    std::optional<SweepSpec> sweep;
    std::string output_dir = "out";
};

TabularMDP mdp_from_json(const nlohmann::json& j);
nlohmann::json mdp_to_json(const TabularMDP& mdp);

ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = ".");
nlohmann::json config_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path);

// Write-temp-then-rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string format_double(double v);  // shortest round-trip-safe formatting

}  // namespace fqc
