#include "ftat/lcw.hpp"

namespace ftat {

double mean_pairwise_distance_from(const Matrix& distances) {
  const Eigen::Index n = distances.rows();
  if (n < 2) {
    return 0.0;
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      total += distances(i, j);
    }
  }
  return 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

double mean_pairwise_distance(const Matrix& features) {
  return mean_pairwise_distance_from(pairwise_l2(features));
}

Neighborhoods neighborhoods_from(const Matrix& distances) {
  const Eigen::Index n = distances.rows();
  const double threshold = mean_pairwise_distance_from(distances);
  Neighborhoods out(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    auto& list = out[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == k || distances(k, j) < threshold) {
        list.push_back(j);
      }
    }
  }
  return out;
}

Neighborhoods neighborhoods(const Matrix& features) {
  if (features.rows() < 1) {
    throw InvalidInput("neighbourhoods need at least one row");
  }
  return neighborhoods_from(pairwise_l2(features));
}

std::vector<int> consistency_indicator(const Matrix& preds, const Neighborhoods& nbhd,
                                       double beta) {
  if (!(beta > 0.0)) {
    throw InvalidInput("beta must be positive");
  }
  if (static_cast<Eigen::Index>(nbhd.size()) != preds.rows()) {
    throw InvalidInput("neighbourhood count does not match prediction rows");
  }
  std::vector<int> ind(nbhd.size(), 0);
  Eigen::RowVectorXd mean(preds.cols());
  for (std::size_t k = 0; k < nbhd.size(); ++k) {
    mean.setZero();
    for (Eigen::Index j : nbhd[k]) {
      mean += preds.row(j);
    }
    mean /= static_cast<double>(nbhd[k].size());
    const double dist = (preds.row(static_cast<Eigen::Index>(k)) - mean).norm();
    ind[k] = dist < beta ? 1 : 0;
  }
  return ind;
}

Vector sample_weights(const Matrix& adjusted, const std::vector<int>& indicators) {
  if (static_cast<Eigen::Index>(indicators.size()) != adjusted.rows()) {
    throw InvalidInput("indicator count does not match prediction rows");
  }
  Vector w(adjusted.rows());
  for (Eigen::Index i = 0; i < adjusted.rows(); ++i) {
    w[i] = indicators[static_cast<std::size_t>(i)] != 0 ? margin(adjusted.row(i)) : 0.0;
  }
  return w;
}

double NeighborhoodReport::consistent_fraction() const {
  if (indicators.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (int v : indicators) {
    s += v;
  }
  return s / static_cast<double>(indicators.size());
}

NeighborhoodReport local_consistent_weights(const Matrix& features,
                                            const Matrix& indicator_preds,
                                            const Matrix& adjusted, double beta) {
  NeighborhoodReport r;
  const Matrix dist = pairwise_l2(features);
  r.mean_distance = mean_pairwise_distance_from(dist);
  r.neighbors = neighborhoods_from(dist);
  r.indicators = consistency_indicator(indicator_preds, r.neighbors, beta);
  r.weights = sample_weights(adjusted, r.indicators);
  return r;
}

}  // namespace ftat
