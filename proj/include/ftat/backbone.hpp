#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ftat/core_math.hpp"

namespace ftat {

class Philox;

/// Weights and biases of every layer. Also used as the gradient type.
struct Parameters {
  std::vector<Matrix> weights;  ///< layer l: dims[l+1] x dims[l]
  std::vector<Vector> biases;   ///< layer l: dims[l+1]

  std::size_t size() const;
  bool all_finite() const;
  Parameters zeros_like() const;
  Parameters& operator+=(const Parameters& other);
  Parameters& operator*=(double c);

  /// Row-major concatenation, layer by layer, weights before biases.
  Vector flatten() const;
  void assign_flat(const Vector& flat);
};

struct ForwardPass {
  std::vector<Matrix> pre;    ///< pre-activations of every layer
  std::vector<Matrix> post;   ///< post[0] is the input; post[l+1] = relu(pre[l]) for hidden l
  Matrix logits;
};

/// Fully connected network with rectifier hidden units and a linear output layer.
class MlpModel {
 public:
  MlpModel() = default;
  /// All-zero parameters.
  explicit MlpModel(std::vector<int> layer_dims);
  MlpModel(std::vector<int> layer_dims, Parameters params);

  /// He-normal weights, zero biases.
  static MlpModel random(std::vector<int> layer_dims, Philox& rng, double scale = 1.0);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int num_classes() const { return dims_.back(); }
  const Parameters& params() const { return params_; }
  Parameters& params() { return params_; }

  ForwardPass forward(const Matrix& x) const;
  Matrix logits(const Matrix& x) const { return forward(x).logits; }
  Matrix predict_proba(const Matrix& x) const { return softmax_rows(logits(x)); }

  /// Gradient of a loss given dL/dlogits for the cached forward pass.
  Parameters backward(const ForwardPass& pass, const Matrix& grad_logits) const;

 private:
  void check_shapes() const;

  std::vector<int> dims_;
  Parameters params_;
};

enum class UpdateRule { GradientDescent, Momentum };

UpdateRule parse_update_rule(const std::string& name);
std::string to_string(UpdateRule rule);

struct OptimizerState {
  double learning_rate = 1e-4;
  UpdateRule rule = UpdateRule::GradientDescent;
  double momentum = 0.9;
  Parameters velocity;  ///< empty until the first momentum step

  explicit OptimizerState(double lr, UpdateRule r = UpdateRule::GradientDescent,
                          double mom = 0.9);
};

/// (1/n) sum_i weights_i * Entropy(softmax(z_i + ln adjustment)).
///
/// softmax(z + ln r) equals the renormalised product softmax(z) * r, so this is
/// the entropy of the prior-adjusted prediction.
double weighted_entropy_loss(const MlpModel& model, const Matrix& x, const Vector& weights,
                             const Vector& adjustment);

/// Analytic gradient of weighted_entropy_loss. The adjustment is a constant.
Parameters loss_gradient(const MlpModel& model, const Matrix& x, const Vector& weights,
                         const Vector& adjustment);

/// Loss and gradient from one forward pass.
std::pair<double, Parameters> loss_and_gradient(const MlpModel& model, const Matrix& x,
                                                const Vector& weights,
                                                const Vector& adjustment);

/// One optimizer step. Returns false (and leaves the model untouched) when the
/// gradient has non-finite entries.
bool apply_update(MlpModel& model, const Parameters& gradient, OptimizerState& opt);

/// Mean cross-entropy and its gradient with respect to the parameters.
std::pair<double, Parameters> cross_entropy_gradient(const MlpModel& model, const Matrix& x,
                                                     const std::vector<int>& labels);

}  // namespace ftat
