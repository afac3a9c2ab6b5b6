#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ftat/backbone.hpp"
#include "ftat/cdo.hpp"
#include "ftat/checkpoint.hpp"
#include "ftat/data.hpp"

namespace ftat {

enum class Method { Ftat, NoAdapt, EntropyMin };

/// How per-sample adaptation weights are produced.
enum class Weighting {
  Lcw,      ///< margin x neighbourhood consistency
  Uniform,  ///< all ones
  None,     ///< all zeros; disables the entropy step
};

/// Which predictions the consistency indicator compares.
enum class IndicatorSource { Raw, Adjusted };

Method parse_method(const std::string& s);
std::string to_string(Method m);
Weighting parse_weighting(const std::string& s);
std::string to_string(Weighting w);
IndicatorSource parse_indicator_source(const std::string& s);
std::string to_string(IndicatorSource s);

struct EngineConfig {
  Method method = Method::Ftat;

  // prior tracking
  double alpha = 0.1;
  double epsilon = binary_entropy(0.7);
  int update_sign = -1;
  double lambda = 1e-3;
  bool per_member_trackers = false;

  // sample weighting
  double beta = 0.3;
  Weighting weighting = Weighting::Lcw;
  IndicatorSource indicator_source = IndicatorSource::Raw;

  // ensemble
  std::vector<double> learning_rates = {1e-5, 5e-4, 1e-4};
  double weight_smoothing = 0.0;

  // test-time optimisation
  UpdateRule rule = UpdateRule::GradientDescent;
  double momentum = 0.9;
  int steps_per_batch = 1;
  int batch_size = 512;
  double entropy_min_learning_rate = 1e-3;

  /// Throws InvalidInput on out-of-range values.
  void validate(int num_classes) const;
};

struct BatchResult {
  int t = 0;
  Matrix predictions;
  std::vector<int> labels;
  ProbVector prior_used = ProbVector::uniform(2);  ///< estimate entering the batch
  ProbVector prior = ProbVector::uniform(2);       ///< estimate after the batch
  std::vector<double> member_weights;
  std::vector<double> member_losses;
  double confident_fraction = 0.0;
  double consistent_fraction = 0.0;
  double mean_sample_weight = 0.0;
  double mean_distance = 0.0;
  double condition = 0.0;
  bool tracker_updated = false;
  int skipped_updates = 0;
};

struct Member {
  MlpModel model;
  OptimizerState optimizer;
};

/// Predict-then-adapt loop over one stream.
///
/// Each batch is scored with the parameters and prior estimate that entered
/// it; parameters and the tracker are then updated from the same batch.
class Engine {
 public:
  Engine(const Checkpoint& checkpoint, EngineConfig config);
  Engine(std::vector<Member> members, ProbVector source_prior, EngineConfig config);

  /// `batch.features` must already be standardised.
  BatchResult process_batch(const Batch& batch);

  const EngineConfig& config() const { return config_; }
  const std::vector<Member>& members() const { return members_; }
  const PriorTracker& tracker(std::size_t member = 0) const;
  const ProbVector& source_prior() const { return source_prior_; }

 private:
  BatchResult process_no_adapt(const Batch& batch);
  BatchResult process_entropy_min(const Batch& batch);
  BatchResult process_ftat(const Batch& batch);

  EngineConfig config_;
  std::vector<Member> members_;
  ProbVector source_prior_;
  std::vector<PriorTracker> trackers_;
  std::optional<ProbVector> previous_weights_;
};

/// Standardises every batch with the checkpoint statistics and folds
/// process_batch over the stream. The feature width is checked for every batch
/// before the first one is processed.
std::vector<BatchResult> run_stream(const Checkpoint& checkpoint, const Stream& stream,
                                    const EngineConfig& config);

/// Argmax per row, ties to the lowest index.
std::vector<int> predicted_labels(const Matrix& preds);

}  // namespace ftat
