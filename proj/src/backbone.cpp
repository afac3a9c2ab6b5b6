#include "ftat/backbone.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "ftat/rng.hpp"

namespace ftat {

std::size_t Parameters::size() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

bool Parameters::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      return false;
    }
  }
  return true;
}

Parameters Parameters::zeros_like() const {
  Parameters z;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    z.weights.push_back(Matrix::Zero(weights[l].rows(), weights[l].cols()));
    z.biases.push_back(Vector::Zero(biases[l].size()));
  }
  return z;
}

Parameters& Parameters::operator+=(const Parameters& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

Parameters& Parameters::operator*=(double c) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= c;
    biases[l] *= c;
  }
  return *this;
}

Vector Parameters::flatten() const {
  Vector flat(static_cast<Eigen::Index>(size()));
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Eigen::Index nw = weights[l].size();
    flat.segment(offset, nw) = Eigen::Map<const Vector>(weights[l].data(), nw);
    offset += nw;
    flat.segment(offset, biases[l].size()) = biases[l];
    offset += biases[l].size();
  }
  return flat;
}

void Parameters::assign_flat(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != size()) {
    throw InvalidInput("flat parameter count " + std::to_string(flat.size()) +
                       " does not match the architecture (" + std::to_string(size()) + ")");
  }
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Eigen::Index nw = weights[l].size();
    Eigen::Map<Vector>(weights[l].data(), nw) = flat.segment(offset, nw);
    offset += nw;
    biases[l] = flat.segment(offset, biases[l].size());
    offset += biases[l].size();
  }
}

MlpModel::MlpModel(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) {
    throw InvalidInput("an MLP needs at least input and output dimensions");
  }
  for (int d : dims_) {
    if (d < 1) {
      throw InvalidInput("layer dimensions must be positive");
    }
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    params_.weights.push_back(Matrix::Zero(dims_[l + 1], dims_[l]));
    params_.biases.push_back(Vector::Zero(dims_[l + 1]));
  }
}

MlpModel::MlpModel(std::vector<int> layer_dims, Parameters params)
    : dims_(std::move(layer_dims)), params_(std::move(params)) {
  check_shapes();
}

MlpModel MlpModel::random(std::vector<int> layer_dims, Philox& rng, double scale) {
  MlpModel model(std::move(layer_dims));
  for (auto& w : model.params_.weights) {
    const double sd = scale * std::sqrt(2.0 / static_cast<double>(w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = sd * rng.normal();
    }
  }
  return model;
}

void MlpModel::check_shapes() const {
  if (dims_.size() < 2 || params_.weights.size() != dims_.size() - 1 ||
      params_.biases.size() != dims_.size() - 1) {
    throw InvalidInput("layer count does not match layer_dims");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (params_.weights[l].rows() != dims_[l + 1] || params_.weights[l].cols() != dims_[l] ||
        params_.biases[l].size() != dims_[l + 1]) {
      throw InvalidInput("parameter shapes of layer " + std::to_string(l) +
                         " do not match layer_dims");
    }
  }
}

ForwardPass MlpModel::forward(const Matrix& x) const {
  if (x.cols() != input_dim()) {
    throw InvalidInput("input has " + std::to_string(x.cols()) + " columns, model expects " +
                       std::to_string(input_dim()));
  }
  ForwardPass pass;
  pass.post.push_back(x);
  const std::size_t layers = params_.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = pass.post.back() * params_.weights[l].transpose();
    z.rowwise() += params_.biases[l].transpose();
    if (l + 1 < layers) {
      pass.post.push_back(z.cwiseMax(0.0));
    }
    pass.pre.push_back(std::move(z));
  }
  pass.logits = pass.pre.back();
  return pass;
}

Parameters MlpModel::backward(const ForwardPass& pass, const Matrix& grad_logits) const {
  Parameters grad = params_.zeros_like();
  Matrix delta = grad_logits;
  for (std::size_t l = params_.weights.size(); l-- > 0;) {
    grad.weights[l].noalias() = delta.transpose() * pass.post[l];
    grad.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix upstream = delta * params_.weights[l];
      delta = (pass.pre[l - 1].array() > 0.0).select(upstream, 0.0);
    }
  }
  return grad;
}

UpdateRule parse_update_rule(const std::string& name) {
  if (name == "gd" || name == "sgd") {
    return UpdateRule::GradientDescent;
  }
  if (name == "momentum") {
    return UpdateRule::Momentum;
  }
  throw InvalidInput("unknown update rule '" + name + "' (expected gd or momentum)");
}

std::string to_string(UpdateRule rule) {
  return rule == UpdateRule::Momentum ? "momentum" : "gd";
}

OptimizerState::OptimizerState(double lr, UpdateRule r, double mom)
    : learning_rate(lr), rule(r), momentum(mom) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInput("learning rate must be positive");
  }
}

namespace {

void check_weights(const Matrix& x, const Vector& weights, const Vector& adjustment, int k) {
  if (weights.size() != x.rows()) {
    throw InvalidInput("sample weight count does not match batch rows");
  }
  if (!weights.allFinite() || (weights.array() < 0.0).any()) {
    throw InvalidInput("sample weights must be finite and nonnegative");
  }
  if (adjustment.size() != k) {
    throw InvalidInput("adjustment length does not match the class count");
  }
  if (!adjustment.allFinite() || (adjustment.array() <= 0.0).any()) {
    throw InvalidInput("adjustment entries must be positive");
  }
}

Matrix adjusted_logits(const Matrix& logits, const Vector& adjustment) {
  Matrix u = logits;
  const Eigen::RowVectorXd shift = adjustment.array().max(kProbFloor).log().matrix().transpose();
  u.rowwise() += shift;
  return u;
}

}  // namespace

std::pair<double, Parameters> loss_and_gradient(const MlpModel& model, const Matrix& x,
                                                const Vector& weights,
                                                const Vector& adjustment) {
  check_weights(x, weights, adjustment, model.num_classes());
  const ForwardPass pass = model.forward(x);
  const Matrix logp = log_softmax_rows(adjusted_logits(pass.logits, adjustment));
  const Eigen::Index n = x.rows();
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;

  double loss = 0.0;
  Matrix grad_logits(n, logp.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd p = logp.row(i).array().exp();
    const double h = -(p.array() * logp.row(i).array()).sum();
    loss += weights[i] * h;
    // d/du_k of -sum_j p_j ln p_j is -p_k (ln p_k + H).
    grad_logits.row(i) = -(weights[i] * inv_n) * (p.array() * (logp.row(i).array() + h)).matrix();
  }
  return {loss * inv_n, model.backward(pass, grad_logits)};
}

double weighted_entropy_loss(const MlpModel& model, const Matrix& x, const Vector& weights,
                             const Vector& adjustment) {
  check_weights(x, weights, adjustment, model.num_classes());
  const Matrix logp = log_softmax_rows(adjusted_logits(model.logits(x), adjustment));
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double h = -(logp.row(i).array().exp() * logp.row(i).array()).sum();
    loss += weights[i] * h;
  }
  return x.rows() > 0 ? loss / static_cast<double>(x.rows()) : 0.0;
}

Parameters loss_gradient(const MlpModel& model, const Matrix& x, const Vector& weights,
                         const Vector& adjustment) {
  return loss_and_gradient(model, x, weights, adjustment).second;
}

bool apply_update(MlpModel& model, const Parameters& gradient, OptimizerState& opt) {
  if (gradient.weights.size() != model.params().weights.size()) {
    throw InvalidInput("gradient layer count does not match the model");
  }
  for (std::size_t l = 0; l < gradient.weights.size(); ++l) {
    if (gradient.weights[l].rows() != model.params().weights[l].rows() ||
        gradient.weights[l].cols() != model.params().weights[l].cols() ||
        gradient.biases[l].size() != model.params().biases[l].size()) {
      throw InvalidInput("gradient shape does not match the model");
    }
  }
  if (!gradient.all_finite()) {
    spdlog::warn("non-finite gradient; parameter update skipped");
    return false;
  }
  Parameters& p = model.params();
  if (opt.rule == UpdateRule::Momentum) {
    if (opt.velocity.weights.empty()) {
      opt.velocity = p.zeros_like();
    }
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      opt.velocity.weights[l] = opt.momentum * opt.velocity.weights[l] + gradient.weights[l];
      opt.velocity.biases[l] = opt.momentum * opt.velocity.biases[l] + gradient.biases[l];
      p.weights[l] -= opt.learning_rate * opt.velocity.weights[l];
      p.biases[l] -= opt.learning_rate * opt.velocity.biases[l];
    }
  } else {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      p.weights[l] -= opt.learning_rate * gradient.weights[l];
      p.biases[l] -= opt.learning_rate * gradient.biases[l];
    }
  }
  return true;
}

std::pair<double, Parameters> cross_entropy_gradient(const MlpModel& model, const Matrix& x,
                                                     const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
    throw InvalidInput("label count does not match batch rows");
  }
  const ForwardPass pass = model.forward(x);
  const Matrix logp = log_softmax_rows(pass.logits);
  const Eigen::Index n = x.rows();
  Matrix grad = logp.array().exp();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    loss -= logp(i, y);
    grad(i, y) -= 1.0;
  }
  grad /= static_cast<double>(n);
  return {loss / static_cast<double>(n), model.backward(pass, grad)};
}

}  // namespace ftat
