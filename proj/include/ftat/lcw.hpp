#pragma once

#include <vector>

#include "ftat/core_math.hpp"

namespace ftat {

using Neighborhoods = std::vector<std::vector<Eigen::Index>>;

/// Mean of the n(n-1)/2 off-diagonal entries of a distance matrix; 0 for n = 1.
double mean_pairwise_distance_from(const Matrix& distances);
double mean_pairwise_distance(const Matrix& features);

/// N(x_k) = {x : dist(x, x_k) < mean pairwise distance} plus x_k itself.
/// Index lists are ascending.
Neighborhoods neighborhoods_from(const Matrix& distances);
Neighborhoods neighborhoods(const Matrix& features);

/// 1 where ||preds_k - mean_{j in N(k)} preds_j||_2 < beta, else 0.
std::vector<int> consistency_indicator(const Matrix& preds, const Neighborhoods& nbhd,
                                       double beta);

/// margin(adjusted_k) * indicator_k.
Vector sample_weights(const Matrix& adjusted, const std::vector<int>& indicators);

struct NeighborhoodReport {
  Neighborhoods neighbors;
  double mean_distance = 0.0;
  std::vector<int> indicators;
  Vector weights;

  double consistent_fraction() const;
};

/// Full weighter: neighbourhoods from `features`, indicators from
/// `indicator_preds`, margins from `adjusted`.
NeighborhoodReport local_consistent_weights(const Matrix& features,
                                            const Matrix& indicator_preds,
                                            const Matrix& adjusted, double beta);

}  // namespace ftat
