#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "ftat/checkpoint.hpp"
#include "ftat/engine.hpp"

namespace ftat {

/// Bad configuration file (the CLI maps this to exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  TrainConfig train;
  EngineConfig engine;
};

/// Sections: train, cdo, lcw, dme, adapt. Every key is optional and falls back
/// to its default; unknown sections or keys are rejected. The entropy
/// threshold is given either as `cdo.epsilon` or as `cdo.epsilon_p`, in which
/// case epsilon = Entropy([p, 1 - p]).
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);

/// The defaults as a fully populated config document.
nlohmann::json default_config_json();

}  // namespace ftat
