#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "ftat/backbone.hpp"
#include "ftat/data.hpp"

namespace ftat {

/// Source model plus everything needed to adapt it on a new stream.
struct Checkpoint {
  static constexpr int kVersion = 1;

  MlpModel model;
  ProbVector source_prior = ProbVector::uniform(2);
  Standardization standardization;
  TableSchema schema;

  const std::vector<std::string>& class_names() const { return schema.class_names; }

  /// Throws DataError if the pieces disagree with each other.
  void validate() const;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

struct TrainConfig {
  std::vector<int> hidden = {256, 256};
  int epochs = 50;
  int batch_size = 512;
  double learning_rate = 0.05;
  UpdateRule rule = UpdateRule::Momentum;
  double momentum = 0.9;
  /// Fraction held out for best-epoch selection; 0 disables selection.
  double holdout = 0.15;
  std::uint64_t seed = 0;
};

struct TrainReport {
  int best_epoch = -1;
  double best_holdout_accuracy = 0.0;
  double final_train_accuracy = 0.0;
};

/// Mini-batch cross-entropy training. The source prior and the standardisation
/// statistics are taken from the full labeled table; the holdout split only
/// selects the epoch to keep.
Checkpoint train_source(const Dataset& data, const TrainConfig& config,
                        TrainReport* report = nullptr);

}  // namespace ftat
