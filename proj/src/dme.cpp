#include "ftat/dme.hpp"

#include <algorithm>
#include <cmath>

#include "ftat/backbone.hpp"

namespace ftat {

double member_loss(const Matrix& adjusted, const Vector& sample_weights) {
  if (adjusted.rows() == 0) {
    throw InvalidInput("member loss needs a non-empty batch");
  }
  if (sample_weights.size() != adjusted.rows()) {
    throw InvalidInput("sample weight count does not match prediction rows");
  }
  if (adjusted.cols() < 2) {
    throw InvalidInput("member loss needs at least two classes");
  }
  const double log_k = std::log(static_cast<double>(adjusted.cols()));
  double weighted = 0.0;
  double total_weight = 0.0;
  double plain = 0.0;
  for (Eigen::Index i = 0; i < adjusted.rows(); ++i) {
    const double h = entropy(adjusted.row(i));
    weighted += sample_weights[i] * h;
    total_weight += sample_weights[i];
    plain += h;
  }
  const double mean = total_weight > 0.0 ? weighted / total_weight
                                         : plain / static_cast<double>(adjusted.rows());
  return std::clamp(mean / log_k, 0.0, 1.0);
}

double member_loss(const MlpModel& member, const Matrix& features, const Vector& sample_weights,
                   const Vector& adjustment) {
  Matrix logits = member.logits(features);
  logits.rowwise() += adjustment.array().max(kProbFloor).log().matrix().transpose();
  return member_loss(softmax_rows(logits), sample_weights);
}

ProbVector compute_weights(const std::vector<double>& losses) {
  if (losses.empty()) {
    throw InvalidInput("ensemble needs at least one member");
  }
  const auto m = static_cast<Eigen::Index>(losses.size());
  Vector w(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double r = losses[static_cast<std::size_t>(i)];
    if (!(r >= 0.0 && r <= 1.0)) {
      throw InvalidInput("member loss must lie in [0, 1]");
    }
    w[i] = 1.0 - r;
  }
  const double total = w.sum();
  if (total <= 1e-12) {
    return ProbVector::uniform(m);
  }
  return ProbVector(w / total);
}

Matrix ensemble_predict(const std::vector<Matrix>& member_preds, const ProbVector& weights) {
  if (member_preds.empty() || static_cast<Eigen::Index>(member_preds.size()) != weights.size()) {
    throw InvalidInput("member count does not match the weight vector");
  }
  for (const auto& p : member_preds) {
    if (p.rows() != member_preds[0].rows() || p.cols() != member_preds[0].cols()) {
      throw InvalidInput("member predictions differ in shape");
    }
  }
  if (member_preds.size() == 1) {
    return member_preds[0];
  }
  Matrix out = weights[0] * member_preds[0];
  for (std::size_t i = 1; i < member_preds.size(); ++i) {
    out += weights[static_cast<Eigen::Index>(i)] * member_preds[i];
  }
  return out;
}

}  // namespace ftat
