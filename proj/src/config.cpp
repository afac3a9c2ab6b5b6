#include "ftat/config.hpp"

#include <fstream>
#include <map>
#include <set>

namespace ftat {

using nlohmann::json;

namespace {

void check_keys(const json& section, const std::string& name, const std::set<std::string>& allowed) {
  if (!section.is_object()) {
    throw ConfigError("config section '" + name + "' must be an object");
  }
  for (const auto& [key, value] : section.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key '" + name + "." + key + "'");
    }
  }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (section.contains(key)) {
    out = section.at(key).get<T>();
  }
}

}  // namespace

Config config_from_json(const json& j) {
  Config c;
  if (!j.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "train" && key != "cdo" && key != "lcw" && key != "dme" && key != "adapt") {
        throw ConfigError("unknown config section '" + key + "'");
      }
    }
    if (j.contains("train")) {
      const auto& s = j.at("train");
      check_keys(s, "train", {"hidden", "epochs", "batch_size", "learning_rate", "update_rule",
                              "momentum", "holdout", "seed"});
      read(s, "hidden", c.train.hidden);
      read(s, "epochs", c.train.epochs);
      read(s, "batch_size", c.train.batch_size);
      read(s, "learning_rate", c.train.learning_rate);
      read(s, "momentum", c.train.momentum);
      read(s, "holdout", c.train.holdout);
      read(s, "seed", c.train.seed);
      if (s.contains("update_rule")) {
        c.train.rule = parse_update_rule(s.at("update_rule").get<std::string>());
      }
    }
    if (j.contains("cdo")) {
      const auto& s = j.at("cdo");
      check_keys(s, "cdo", {"alpha", "epsilon", "epsilon_p", "update_sign", "lambda",
                            "per_member_trackers"});
      if (s.contains("epsilon") && s.contains("epsilon_p")) {
        throw ConfigError("give either cdo.epsilon or cdo.epsilon_p, not both");
      }
      read(s, "alpha", c.engine.alpha);
      read(s, "epsilon", c.engine.epsilon);
      if (s.contains("epsilon_p")) {
        const double p = s.at("epsilon_p").get<double>();
        if (!(p > 0.0 && p < 1.0)) {
          throw ConfigError("cdo.epsilon_p must lie in (0, 1)");
        }
        c.engine.epsilon = binary_entropy(p);
      }
      read(s, "update_sign", c.engine.update_sign);
      read(s, "lambda", c.engine.lambda);
      read(s, "per_member_trackers", c.engine.per_member_trackers);
    }
    if (j.contains("lcw")) {
      const auto& s = j.at("lcw");
      check_keys(s, "lcw", {"beta", "weighting", "indicator_source"});
      read(s, "beta", c.engine.beta);
      if (s.contains("weighting")) {
        c.engine.weighting = parse_weighting(s.at("weighting").get<std::string>());
      }
      if (s.contains("indicator_source")) {
        c.engine.indicator_source =
            parse_indicator_source(s.at("indicator_source").get<std::string>());
      }
    }
    if (j.contains("dme")) {
      const auto& s = j.at("dme");
      check_keys(s, "dme", {"learning_rates", "weight_smoothing"});
      read(s, "learning_rates", c.engine.learning_rates);
      read(s, "weight_smoothing", c.engine.weight_smoothing);
    }
    if (j.contains("adapt")) {
      const auto& s = j.at("adapt");
      check_keys(s, "adapt", {"method", "update_rule", "momentum", "steps_per_batch",
                              "batch_size", "entropy_min_learning_rate"});
      if (s.contains("method")) {
        c.engine.method = parse_method(s.at("method").get<std::string>());
      }
      if (s.contains("update_rule")) {
        c.engine.rule = parse_update_rule(s.at("update_rule").get<std::string>());
      }
      read(s, "momentum", c.engine.momentum);
      read(s, "steps_per_batch", c.engine.steps_per_batch);
      read(s, "batch_size", c.engine.batch_size);
      read(s, "entropy_min_learning_rate", c.engine.entropy_min_learning_rate);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  if (c.engine.batch_size < 1 || c.train.batch_size < 1 || c.train.epochs < 0) {
    throw ConfigError("batch sizes must be >= 1 and epochs >= 0");
  }
  if (!(c.train.holdout >= 0.0 && c.train.holdout < 1.0)) {
    throw ConfigError("train.holdout must lie in [0, 1)");
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

json default_config_json() {
  const Config c;
  return {
      {"train",
       {{"hidden", c.train.hidden},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"update_rule", to_string(c.train.rule)},
        {"momentum", c.train.momentum},
        {"holdout", c.train.holdout},
        {"seed", c.train.seed}}},
      {"cdo",
       {{"alpha", c.engine.alpha},
        {"epsilon_p", 0.7},
        {"update_sign", c.engine.update_sign},
        {"lambda", c.engine.lambda},
        {"per_member_trackers", c.engine.per_member_trackers}}},
      {"lcw",
       {{"beta", c.engine.beta},
        {"weighting", to_string(c.engine.weighting)},
        {"indicator_source", to_string(c.engine.indicator_source)}}},
      {"dme",
       {{"learning_rates", c.engine.learning_rates},
        {"weight_smoothing", c.engine.weight_smoothing}}},
      {"adapt",
       {{"method", to_string(c.engine.method)},
        {"update_rule", to_string(c.engine.rule)},
        {"momentum", c.engine.momentum},
        {"steps_per_batch", c.engine.steps_per_batch},
        {"batch_size", c.engine.batch_size},
        {"entropy_min_learning_rate", c.engine.entropy_min_learning_rate}}},
  };
}

}  // namespace ftat
