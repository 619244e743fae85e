#pragma once

// verdoc command-line driver. Exit codes: 0 success, 1 config error,
// 2 data error, 3 internal error.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "verdoc/attacks.hpp"
#include "verdoc/mlp.hpp"

namespace verdoc {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::size_t min_df = 1;
    double test_fraction = 0.3;
    std::vector<std::string> properties;
    TrainConfig train;
    EvoConfig evo;
    std::string method = "symbolic";

    /// Unknown keys and wrong types raise ConfigError.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    /// `verdoc/<version> seed=<seed> config=<hash of to_json()>`.
    std::string provenance() const;
};

int run_cli(const std::vector<std::string>& args);

}  // namespace verdoc
