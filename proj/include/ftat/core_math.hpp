#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ftat {

/// Dense row-major matrix; rows are samples throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowRef = Eigen::Ref<const Eigen::RowVectorXd>;

/// Floor applied before any logarithm or division by a probability.
inline constexpr double kProbFloor = 1e-12;
/// Tolerance on the sum of a probability vector.
inline constexpr double kSimplexTol = 1e-9;

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A length-K vector on the probability simplex.
///
/// Construction validates: entries in [0, 1] and sum within kSimplexTol of 1.
class ProbVector {
 public:
  explicit ProbVector(Vector values);
  ProbVector(std::initializer_list<double> values);

  /// Rescales a nonnegative vector onto the simplex.
  static ProbVector normalized(const Vector& nonnegative);
  static ProbVector uniform(Eigen::Index k);

  const Vector& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

  bool operator==(const ProbVector& other) const { return values_ == other.values_; }

 private:
  Vector values_;
};

/// K x K matrix with K >= 2 and finite entries.
class SquareMatrix {
 public:
  explicit SquareMatrix(Matrix values);

  const Matrix& values() const { return values_; }
  Eigen::Index size() const { return values_.rows(); }

 private:
  Matrix values_;
};

ProbVector softmax(const Vector& logits);

/// Row-wise softmax of an n x K logit matrix.
Matrix softmax_rows(const Matrix& logits);

/// Row-wise log-softmax, computed as z - logsumexp(z).
Matrix log_softmax_rows(const Matrix& logits);

/// Shannon entropy in nats, with 0 ln 0 = 0.
double entropy(const ProbVector& p);
double entropy(RowRef p);

/// max(p) - min(p).
double margin(const ProbVector& p);
double margin(RowRef p);

/// Entropy([p, 1 - p]).
double binary_entropy(double p);

/// Index of the largest entry; ties go to the lowest index.
Eigen::Index argmax(RowRef p);

/// n x n Euclidean distances between the rows of `rows`.
Matrix pairwise_l2(const Matrix& rows);

/// Solves (C + lambda I) x = b with a full-pivot LU factorisation.
///
/// Throws SingularMatrix if the regularised system is not invertible.
Vector solve_regularized(const SquareMatrix& c, const Vector& b, double lambda);

/// KL(p || q) in nats; q is floored at kProbFloor.
double kl_divergence(const ProbVector& p, const ProbVector& q);

double l2_label_distance(const ProbVector& p, const ProbVector& q);

/// 2-norm condition number estimate from singular values.
double condition_number(const Matrix& m);

}  // namespace ftat
