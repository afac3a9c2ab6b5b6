#pragma once

#include <vector>

#include "ftat/core_math.hpp"

namespace ftat {

class MlpModel;

/// Sample-weighted mean entropy of `adjusted` divided by ln K, in [0, 1].
///
/// The mean is normalised by the total sample weight; when every weight is
/// zero the unweighted mean entropy is used instead.
double member_loss(const Matrix& adjusted, const Vector& sample_weights);

/// Convenience overload that runs the member on the batch first.
double member_loss(const MlpModel& member, const Matrix& features, const Vector& sample_weights,
                   const Vector& adjustment);

/// w_i = (1 - R_i) / sum_j (1 - R_j); uniform when the denominator is <= 1e-12.
ProbVector compute_weights(const std::vector<double>& losses);

/// Row-wise convex combination sum_i w_i * preds_i.
Matrix ensemble_predict(const std::vector<Matrix>& member_preds, const ProbVector& weights);

}  // namespace ftat
