#pragma once

#include <optional>

#include "ftat/core_math.hpp"

namespace ftat {

/// Rescales each prediction row by prior / source_prior and renormalises.
///
/// When prior equals source_prior elementwise the input is returned unchanged.
Matrix adjust_predictions(const Matrix& preds, const ProbVector& prior,
                          const ProbVector& source_prior);

/// prior / max(source_prior, kProbFloor), the per-class adjustment factor.
Vector adjustment_ratio(const ProbVector& prior, const ProbVector& source_prior);

struct ConfidentEstimate {
  ProbVector prior;
  std::size_t count = 0;
};

/// Mean of the rows whose entropy is strictly below `epsilon`; nullopt when
/// no row qualifies.
std::optional<ConfidentEstimate> estimate_confident_prior(const Matrix& preds, double epsilon);

/// Row k is the mean prediction over rows whose argmax is k (lowest index wins
/// ties); rows with no members fall back to e_k.
SquareMatrix confusion_matrix(const Matrix& preds);

/// Solves (C + lambda I) x = estimate, clamps entries below kDebiasFloor up to
/// it and renormalises.
ProbVector debias(const SquareMatrix& confusion, const ProbVector& estimate, double lambda);

inline constexpr double kDebiasFloor = 1e-6;

/// Smoothly tracked label prior.
///
/// Keeps a logit-space accumulator initialised at ln(P0); every update adds
/// sign * alpha * debiased and the estimate is the softmax of the accumulator.
class PriorTracker {
 public:
  PriorTracker(ProbVector source_prior, double alpha, int update_sign = -1);

  const ProbVector& source_prior() const { return source_prior_; }
  const ProbVector& estimate() const { return estimate_; }
  const Vector& accumulator() const { return accumulator_; }
  double alpha() const { return alpha_; }
  int update_sign() const { return sign_; }

  void update(const ProbVector& debiased);

 private:
  ProbVector source_prior_;
  Vector accumulator_;
  ProbVector estimate_;
  double alpha_;
  int sign_;
};

struct TrackerStep {
  std::size_t confident_count = 0;
  bool updated = false;
  double condition = 0.0;  ///< condition number of the regularised confusion matrix
  std::optional<ProbVector> confident_estimate;
  std::optional<ProbVector> debiased;
};

/// One tracker step on adjusted predictions: confident estimate, confusion
/// matrix, debiasing, accumulator update. An empty confident set leaves the
/// tracker untouched.
TrackerStep update_tracker(PriorTracker& tracker, const Matrix& adjusted, double epsilon,
                           double lambda);

}  // namespace ftat
