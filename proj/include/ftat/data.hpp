#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftat/core_math.hpp"

namespace ftat {

/// Malformed or inconsistent input data (the CLI maps this to exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FeatureKind { Numeric, Categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::string> levels;  ///< categorical only, in one-hot order
};

struct TableSchema {
  std::vector<FeatureSpec> features;
  std::string label;
  std::vector<std::string> class_names;

  void validate() const;
  /// Feature count after one-hot expansion.
  int expanded_width() const;
  /// True for columns that came from numeric features.
  std::vector<bool> numeric_mask() const;
  int num_classes() const { return static_cast<int>(class_names.size()); }

  nlohmann::json to_json() const;
  static TableSchema from_json(const nlohmann::json& j);
  static TableSchema load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct Dataset {
  TableSchema schema;
  Matrix features;          ///< n x expanded_width
  std::vector<int> labels;  ///< empty when the table carries no label column
};

/// Reads a headed CSV. The label column is required when `require_label` is set
/// and optional otherwise. Throws DataError naming the row and column on failure.
Dataset load_csv(const std::filesystem::path& path, const TableSchema& schema,
                 bool require_label = true);

/// Writes features (and labels, when present) in schema order. Numeric cells
/// use the shortest representation that reads back bit-for-bit; one-hot
/// groups are collapsed to their level name.
void write_csv(const std::filesystem::path& path, const Dataset& data);

/// Per-column z-scoring statistics; one-hot columns keep mean 0 and sd 1.
struct Standardization {
  Vector mean;
  Vector sd;

  static Standardization identity(Eigen::Index width);
  /// Statistics of the numeric columns of `data` (population sd). Constant
  /// columns get identity statistics and a warning.
  static Standardization fit(const Dataset& data);
};

/// Applies (x - mean) / sd column-wise. A zero sd passes the column through
/// with a warning.
Matrix standardize(const Matrix& features, const Standardization& stats);
Dataset standardize(const Dataset& data, const Standardization& stats);

// ---- test streams -------------------------------------------------------

/// Unlabeled test batch. Deliberately has no label or prior fields.
struct Batch {
  int t = 0;
  Matrix features;
};

/// Evaluation-only ground truth for one batch.
struct BatchTruth {
  int t = 0;
  std::vector<int> labels;
  std::optional<ProbVector> prior;
};

struct Stream {
  std::vector<Batch> batches;
  std::vector<BatchTruth> truth;  ///< empty, or one entry per batch
};

/// Synthetic class-conditional Gaussian stream with prescribed shift.
struct ShiftSpec {
  int num_classes = 2;
  int num_features = 2;
  int n_batches = 100;
  int batch_size = 512;
  std::uint64_t seed = 0;

  /// Class means (K x d); defaults to `separation` along axis k for class k.
  Matrix class_means;
  double separation = 3.0;
  double noise_sd = 1.0;

  /// Per-batch priors. Either given explicitly or as a linear ramp.
  std::vector<ProbVector> priors;

  /// Covariate shift: per-class translation (K x d) and per-class noise scale.
  Matrix class_translation;
  Vector class_scale;
  /// Scale the translation linearly from 0 at the first batch to full at the last.
  bool ramp_covariate = false;

  /// Labeled source set (no covariate shift).
  int source_size = 4000;
  std::optional<ProbVector> source_prior;

  void validate() const;
  ProbVector prior_at(int t) const;
  Matrix means() const;

  static ShiftSpec from_json(const nlohmann::json& j);
  static ShiftSpec load(const std::filesystem::path& path);
  /// Linear interpolation from `from` to `to` over n steps.
  static std::vector<ProbVector> ramp(const ProbVector& from, const ProbVector& to, int n);
};

TableSchema synthetic_schema(int num_classes, int num_features);

/// Labeled source sample drawn from the unshifted class conditionals.
Dataset generate_source(const ShiftSpec& spec);

/// Shifted test stream with its ground truth.
Stream generate_synthetic_stream(const ShiftSpec& spec);

/// Writes schema.json, train.csv and stream/{batch_#####.csv, truth.jsonl}.
void materialize_synthetic(const ShiftSpec& spec, const std::filesystem::path& out_dir);

/// Reads batch_*.csv in name order and truth.jsonl if present. Features are
/// returned raw; standardise with checkpoint statistics before adapting.
Stream read_stream_dir(const std::filesystem::path& dir, const TableSchema& schema);

/// Splits a single CSV into consecutive batches of `batch_size` rows. Labels,
/// if present, become the truth sidecar.
Stream stream_from_csv(const std::filesystem::path& path, const TableSchema& schema,
                       int batch_size);

}  // namespace ftat
