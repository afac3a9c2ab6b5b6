#include "ftat/cdo.hpp"

#include <algorithm>
#include <cmath>

namespace ftat {

Vector adjustment_ratio(const ProbVector& prior, const ProbVector& source_prior) {
  if (prior.size() != source_prior.size()) {
    throw InvalidInput("prior and source prior differ in length");
  }
  return prior.values().array() / source_prior.values().array().max(kProbFloor);
}

Matrix adjust_predictions(const Matrix& preds, const ProbVector& prior,
                          const ProbVector& source_prior) {
  if (preds.cols() != prior.size()) {
    throw InvalidInput("prediction width does not match the prior");
  }
  const Vector ratio = adjustment_ratio(prior, source_prior);
  if ((ratio.array() == 1.0).all()) {
    return preds;
  }
  Matrix out = preds;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.row(i).array() *= ratio.transpose().array();
    const double s = out.row(i).sum();
    if (s > 0.0) {
      out.row(i) /= s;
    } else {
      out.row(i).setConstant(1.0 / static_cast<double>(out.cols()));
    }
  }
  return out;
}

std::optional<ConfidentEstimate> estimate_confident_prior(const Matrix& preds, double epsilon) {
  Vector sum = Vector::Zero(preds.cols());
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    if (entropy(preds.row(i)) < epsilon) {
      sum += preds.row(i).transpose();
      ++count;
    }
  }
  if (count == 0) {
    return std::nullopt;
  }
  return ConfidentEstimate{ProbVector::normalized(sum / static_cast<double>(count)), count};
}

SquareMatrix confusion_matrix(const Matrix& preds) {
  const Eigen::Index k = preds.cols();
  Matrix sums = Matrix::Zero(k, k);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    const Eigen::Index c = argmax(preds.row(i));
    sums.row(c) += preds.row(i);
    ++counts[static_cast<std::size_t>(c)];
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      sums.row(c).setZero();
      sums(c, c) = 1.0;
    } else {
      sums.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
  }
  return SquareMatrix(std::move(sums));
}

ProbVector debias(const SquareMatrix& confusion, const ProbVector& estimate, double lambda) {
  Vector x = solve_regularized(confusion, estimate.values(), lambda);
  x = x.array().max(kDebiasFloor);
  return ProbVector::normalized(x);
}

PriorTracker::PriorTracker(ProbVector source_prior, double alpha, int update_sign)
    : source_prior_(std::move(source_prior)),
      accumulator_(source_prior_.values().array().max(kProbFloor).log()),
      estimate_(source_prior_),
      alpha_(alpha),
      sign_(update_sign) {
  if (!(alpha_ >= 0.0 && alpha_ <= 1.0)) {
    throw InvalidInput("tracker alpha must lie in [0, 1]");
  }
  if (sign_ != 1 && sign_ != -1) {
    throw InvalidInput("tracker update sign must be +1 or -1");
  }
}

void PriorTracker::update(const ProbVector& debiased) {
  if (debiased.size() != accumulator_.size()) {
    throw InvalidInput("debiased prior length does not match the tracker");
  }
  const Vector step = (static_cast<double>(sign_) * alpha_) * debiased.values();
  if ((step.array() == 0.0).all()) {
    return;
  }
  accumulator_ += step;
  estimate_ = softmax(accumulator_);
}

TrackerStep update_tracker(PriorTracker& tracker, const Matrix& adjusted, double epsilon,
                           double lambda) {
  TrackerStep step;
  const auto confident = estimate_confident_prior(adjusted, epsilon);
  if (!confident) {
    return step;
  }
  step.confident_count = confident->count;
  step.confident_estimate = confident->prior;
  const SquareMatrix c = confusion_matrix(adjusted);
  Matrix regularised = c.values();
  regularised.diagonal().array() += lambda;
  step.condition = condition_number(regularised);
  step.debiased = debias(c, confident->prior, lambda);
  tracker.update(*step.debiased);
  step.updated = true;
  return step;
}

}  // namespace ftat
