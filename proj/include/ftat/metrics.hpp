#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftat/data.hpp"
#include "ftat/engine.hpp"

namespace ftat {

double metric_accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

/// Mean recall over the classes present in `labels`.
double metric_balanced_accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

/// Positive-class (class 1) F1 when num_classes == 2, macro F1 over the classes
/// seen in either vector otherwise. Empty denominators count as 0.
double metric_f1(const std::vector<int>& preds, const std::vector<int>& labels, int num_classes);

/// One line of the metric log.
struct MetricRecord {
  int t = 0;
  std::size_t n = 0;
  std::optional<double> accuracy;
  std::optional<double> balanced_accuracy;
  std::optional<double> f1;
  std::optional<double> kl_prior;          ///< KL(true prior || estimate)
  std::optional<double> l2_prior_error;    ///< ||true prior - estimate||
  std::optional<double> l2_label_shift;    ///< ||true prior - source prior||
  double confident_fraction = 0.0;
  double consistent_fraction = 0.0;
  double mean_sample_weight = 0.0;
  double condition = 0.0;
  std::vector<double> prior_estimate;
  std::vector<double> member_weights;
  std::vector<double> member_losses;

  nlohmann::json to_json() const;
};

MetricRecord make_record(const BatchResult& result, const BatchTruth* truth,
                         const ProbVector& source_prior, int num_classes);

/// Appends one JSON object per line.
void append_records(std::ostream& out, const std::vector<MetricRecord>& records);

struct SummaryRow {
  std::string metric;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  ///< population standard deviation
};

/// Mean and standard deviation of every scalar numeric field across the log.
/// Vector fields are summarised per component as name[i].
std::vector<SummaryRow> summarize_log(std::istream& log);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Per-batch scalar columns for plotting.
void write_plot_csv(std::istream& log, std::ostream& out);

}  // namespace ftat
