#include "ftat/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ftat {

namespace {

bool all_finite(const auto& m) {
  return m.allFinite();
}

}  // namespace

ProbVector::ProbVector(Vector values) : values_(std::move(values)) {
  if (values_.size() == 0) {
    throw InvalidInput("probability vector must be non-empty");
  }
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidInput("probability entry " + std::to_string(i) + " out of [0, 1]: " +
                         std::to_string(v));
    }
  }
  if (std::abs(values_.sum() - 1.0) > kSimplexTol) {
    throw InvalidInput("probability vector does not sum to 1 (sum = " +
                       std::to_string(values_.sum()) + ")");
  }
}

ProbVector::ProbVector(std::initializer_list<double> values)
    : ProbVector(Vector(Eigen::Map<const Vector>(values.begin(),
                                                 static_cast<Eigen::Index>(values.size())))) {}

ProbVector ProbVector::normalized(const Vector& nonnegative) {
  if (!all_finite(nonnegative) || (nonnegative.array() < 0.0).any()) {
    throw InvalidInput("cannot normalise a vector with negative or non-finite entries");
  }
  const double total = nonnegative.sum();
  if (!(total > 0.0)) {
    throw InvalidInput("cannot normalise a zero vector");
  }
  return ProbVector(nonnegative / total);
}

ProbVector ProbVector::uniform(Eigen::Index k) {
  return ProbVector(Vector::Constant(k, 1.0 / static_cast<double>(k)));
}

SquareMatrix::SquareMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols()) {
    throw InvalidInput("square matrix required");
  }
  if (values_.rows() < 2) {
    throw InvalidInput("square matrix needs K >= 2");
  }
  if (!all_finite(values_)) {
    throw InvalidInput("square matrix has non-finite entries");
  }
}

ProbVector softmax(const Vector& logits) {
  if (logits.size() == 0 || !all_finite(logits)) {
    throw InvalidInput("softmax requires finite, non-empty logits");
  }
  Vector e = (logits.array() - logits.maxCoeff()).exp();
  return ProbVector(e / e.sum());
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

double entropy(RowRef p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      h -= p[i] * std::log(p[i]);
    }
  }
  return std::max(h, 0.0);
}

double entropy(const ProbVector& p) {
  return entropy(p.values().transpose());
}

double margin(RowRef p) {
  return p.maxCoeff() - p.minCoeff();
}

double margin(const ProbVector& p) {
  return margin(p.values().transpose());
}

double binary_entropy(double p) {
  return entropy(ProbVector{p, 1.0 - p});
}

Eigen::Index argmax(RowRef p) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) {
      best = i;
    }
  }
  return best;
}

Matrix pairwise_l2(const Matrix& rows) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index d = rows.cols();
  Matrix dist = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* a = rows.row(i).data();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double* b = rows.row(j).data();
      double s = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
      }
      const double r = std::sqrt(s);
      dist(i, j) = r;
      dist(j, i) = r;
    }
  }
  return dist;
}

Vector solve_regularized(const SquareMatrix& c, const Vector& b, double lambda) {
  if (!(lambda >= 0.0)) {
    throw InvalidInput("regularisation must be >= 0");
  }
  if (b.size() != c.size()) {
    throw InvalidInput("right-hand side length does not match the matrix");
  }
  Matrix a = c.values();
  a.diagonal().array() += lambda;
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) {
    throw SingularMatrix("confusion matrix is singular (lambda = " + std::to_string(lambda) + ")");
  }
  Vector x = lu.solve(b);
  if (!all_finite(x)) {
    throw SingularMatrix("regularised solve produced non-finite values");
  }
  return x;
}

double kl_divergence(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) {
    throw InvalidInput("KL divergence: dimension mismatch");
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      kl += p[i] * (std::log(p[i]) - std::log(std::max(q[i], kProbFloor)));
    }
  }
  return std::max(kl, 0.0);
}

double l2_label_distance(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) {
    throw InvalidInput("L2 label distance: dimension mismatch");
  }
  return (p.values() - q.values()).norm();
}

double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) {
    return 0.0;
  }
  const double smallest = s[s.size() - 1];
  if (smallest <= 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return s[0] / smallest;
}

}  // namespace ftat
