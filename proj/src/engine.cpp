#include "ftat/engine.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "ftat/dme.hpp"
#include "ftat/lcw.hpp"

namespace ftat {

Method parse_method(const std::string& s) {
  if (s == "ftat") return Method::Ftat;
  if (s == "no_adapt" || s == "none") return Method::NoAdapt;
  if (s == "entropy_min" || s == "entropy") return Method::EntropyMin;
  throw InvalidInput("unknown method '" + s + "' (expected ftat, no_adapt or entropy_min)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Ftat: return "ftat";
    case Method::NoAdapt: return "no_adapt";
    case Method::EntropyMin: return "entropy_min";
  }
  return "?";
}

Weighting parse_weighting(const std::string& s) {
  if (s == "lcw") return Weighting::Lcw;
  if (s == "uniform") return Weighting::Uniform;
  if (s == "none") return Weighting::None;
  throw InvalidInput("unknown weighting '" + s + "' (expected lcw, uniform or none)");
}

std::string to_string(Weighting w) {
  switch (w) {
    case Weighting::Lcw: return "lcw";
    case Weighting::Uniform: return "uniform";
    case Weighting::None: return "none";
  }
  return "?";
}

IndicatorSource parse_indicator_source(const std::string& s) {
  if (s == "raw") return IndicatorSource::Raw;
  if (s == "adjusted") return IndicatorSource::Adjusted;
  throw InvalidInput("unknown indicator source '" + s + "' (expected raw or adjusted)");
}

std::string to_string(IndicatorSource s) {
  return s == IndicatorSource::Raw ? "raw" : "adjusted";
}

void EngineConfig::validate(int num_classes) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidInput("alpha must lie in [0, 1]");
  }
  if (!(epsilon > 0.0 && epsilon < std::log(static_cast<double>(num_classes)))) {
    throw InvalidInput("epsilon must lie in (0, ln K)");
  }
  if (!(beta > 0.0)) {
    throw InvalidInput("beta must be positive");
  }
  if (update_sign != 1 && update_sign != -1) {
    throw InvalidInput("update_sign must be +1 or -1");
  }
  if (!(lambda >= 0.0)) {
    throw InvalidInput("lambda must be >= 0");
  }
  if (learning_rates.empty()) {
    throw InvalidInput("at least one learning rate is required");
  }
  for (double lr : learning_rates) {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
      throw InvalidInput("learning rates must be positive");
    }
  }
  if (!(entropy_min_learning_rate > 0.0)) {
    throw InvalidInput("entropy_min learning rate must be positive");
  }
  if (!(weight_smoothing >= 0.0 && weight_smoothing < 1.0)) {
    throw InvalidInput("weight_smoothing must lie in [0, 1)");
  }
  if (steps_per_batch < 0) {
    throw InvalidInput("steps_per_batch must be >= 0");
  }
  if (batch_size < 1) {
    throw InvalidInput("batch_size must be >= 1");
  }
}

std::vector<int> predicted_labels(const Matrix& preds) {
  std::vector<int> out(static_cast<std::size_t>(preds.rows()));
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<int>(argmax(preds.row(i)));
  }
  return out;
}

namespace {

std::vector<Member> members_from(const Checkpoint& ckpt, const EngineConfig& cfg) {
  std::vector<Member> out;
  switch (cfg.method) {
    case Method::NoAdapt:
      out.push_back({ckpt.model, OptimizerState(cfg.learning_rates.front(), cfg.rule, cfg.momentum)});
      break;
    case Method::EntropyMin:
      out.push_back(
          {ckpt.model, OptimizerState(cfg.entropy_min_learning_rate, cfg.rule, cfg.momentum)});
      break;
    case Method::Ftat:
      for (double lr : cfg.learning_rates) {
        out.push_back({ckpt.model, OptimizerState(lr, cfg.rule, cfg.momentum)});
      }
      break;
  }
  return out;
}

}  // namespace

Engine::Engine(const Checkpoint& checkpoint, EngineConfig config)
    : Engine(members_from(checkpoint, config), checkpoint.source_prior, config) {}

Engine::Engine(std::vector<Member> members, ProbVector source_prior, EngineConfig config)
    : config_(std::move(config)),
      members_(std::move(members)),
      source_prior_(std::move(source_prior)) {
  if (members_.empty()) {
    throw InvalidInput("engine needs at least one member");
  }
  const int k = members_.front().model.num_classes();
  config_.validate(k);
  for (const auto& m : members_) {
    if (m.model.layer_dims() != members_.front().model.layer_dims()) {
      throw InvalidInput("ensemble members must share one architecture");
    }
  }
  if (source_prior_.size() != k) {
    throw InvalidInput("source prior length does not match the model");
  }
  const std::size_t n_trackers = config_.per_member_trackers ? members_.size() : 1;
  for (std::size_t i = 0; i < n_trackers; ++i) {
    trackers_.emplace_back(source_prior_, config_.alpha, config_.update_sign);
  }
}

const PriorTracker& Engine::tracker(std::size_t member) const {
  return trackers_.at(config_.per_member_trackers ? member : 0);
}

BatchResult Engine::process_batch(const Batch& batch) {
  if (batch.features.cols() != members_.front().model.input_dim()) {
    throw InvalidInput("batch " + std::to_string(batch.t) + " has " +
                       std::to_string(batch.features.cols()) + " features, model expects " +
                       std::to_string(members_.front().model.input_dim()));
  }
  if (batch.features.rows() == 0) {
    throw InvalidInput("batch " + std::to_string(batch.t) + " is empty");
  }
  switch (config_.method) {
    case Method::NoAdapt: return process_no_adapt(batch);
    case Method::EntropyMin: return process_entropy_min(batch);
    case Method::Ftat: return process_ftat(batch);
  }
  throw InvalidInput("unknown method");
}

BatchResult Engine::process_no_adapt(const Batch& batch) {
  BatchResult r;
  r.t = batch.t;
  r.predictions = members_.front().model.predict_proba(batch.features);
  r.labels = predicted_labels(r.predictions);
  r.prior_used = trackers_.front().estimate();
  r.prior = r.prior_used;
  r.member_weights = {1.0};
  r.member_losses = {member_loss(r.predictions, Vector::Ones(batch.features.rows()))};
  return r;
}

BatchResult Engine::process_entropy_min(const Batch& batch) {
  BatchResult r = process_no_adapt(batch);
  Member& m = members_.front();
  const Vector ones = Vector::Ones(batch.features.rows());
  const Vector no_adjustment = Vector::Ones(m.model.num_classes());
  r.mean_sample_weight = 1.0;
  for (int s = 0; s < config_.steps_per_batch; ++s) {
    if (!apply_update(m.model, loss_gradient(m.model, batch.features, ones, no_adjustment),
                      m.optimizer)) {
      ++r.skipped_updates;
    }
  }
  return r;
}

BatchResult Engine::process_ftat(const Batch& batch) {
  const Matrix& x = batch.features;
  const Eigen::Index n = x.rows();
  const std::size_t m_count = members_.size();
  auto tracker_for = [&](std::size_t i) -> PriorTracker& {
    return trackers_[config_.per_member_trackers ? i : 0];
  };

  BatchResult r;
  r.t = batch.t;
  r.prior_used = trackers_.front().estimate();

  // Predict with the state entering the batch.
  std::vector<Matrix> raw(m_count);
  std::vector<Matrix> adjusted(m_count);
  std::vector<Vector> ratio(m_count);
  for (std::size_t i = 0; i < m_count; ++i) {
    const ProbVector& prior = tracker_for(i).estimate();
    raw[i] = members_[i].model.predict_proba(x);
    ratio[i] = adjustment_ratio(prior, source_prior_);
    adjusted[i] = adjust_predictions(raw[i], prior, source_prior_);
  }

  // Per-sample weights.
  std::vector<Vector> weights(m_count);
  Neighborhoods nbhd;
  if (config_.weighting == Weighting::Lcw) {
    const Matrix dist = pairwise_l2(x);
    r.mean_distance = mean_pairwise_distance_from(dist);
    nbhd = neighborhoods_from(dist);
  }
  double consistent = 0.0;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < m_count; ++i) {
    switch (config_.weighting) {
      case Weighting::Lcw: {
        const Matrix& source =
            config_.indicator_source == IndicatorSource::Raw ? raw[i] : adjusted[i];
        const auto ind = consistency_indicator(source, nbhd, config_.beta);
        for (int v : ind) {
          consistent += v;
        }
        weights[i] = sample_weights(adjusted[i], ind);
        break;
      }
      case Weighting::Uniform:
        weights[i] = Vector::Ones(n);
        consistent += static_cast<double>(n);
        break;
      case Weighting::None:
        weights[i] = Vector::Zero(n);
        break;
    }
    weight_sum += weights[i].sum();
  }
  const double denom = static_cast<double>(n) * static_cast<double>(m_count);
  r.consistent_fraction = consistent / denom;
  r.mean_sample_weight = weight_sum / denom;

  // Ensemble weights from the losses of the pre-update members.
  std::vector<double> losses(m_count);
  for (std::size_t i = 0; i < m_count; ++i) {
    losses[i] = member_loss(adjusted[i], weights[i]);
  }
  ProbVector w = compute_weights(losses);
  if (config_.weight_smoothing > 0.0 && previous_weights_) {
    const double s = config_.weight_smoothing;
    w = ProbVector::normalized((1.0 - s) * w.values() + s * previous_weights_->values());
  }
  previous_weights_ = w;
  r.member_losses = losses;
  r.member_weights.assign(w.values().data(), w.values().data() + w.size());
  r.predictions = ensemble_predict(adjusted, w);
  r.labels = predicted_labels(r.predictions);

  // Weighted entropy steps.
  for (std::size_t i = 0; i < m_count; ++i) {
    for (int s = 0; s < config_.steps_per_batch; ++s) {
      if (!apply_update(members_[i].model,
                        loss_gradient(members_[i].model, x, weights[i], ratio[i]),
                        members_[i].optimizer)) {
        ++r.skipped_updates;
      }
    }
  }

  // Prior tracking from the emitted (pre-update) predictions.
  auto step_tracker = [&](PriorTracker& tracker, const Matrix& preds) {
    try {
      const TrackerStep step = update_tracker(tracker, preds, config_.epsilon, config_.lambda);
      r.confident_fraction += static_cast<double>(step.confident_count) / static_cast<double>(n);
      r.condition = std::max(r.condition, step.condition);
      r.tracker_updated = r.tracker_updated || step.updated;
    } catch (const SingularMatrix& e) {
      spdlog::warn("batch {}: {}; prior estimate left unchanged", batch.t, e.what());
    }
  };
  if (config_.per_member_trackers) {
    for (std::size_t i = 0; i < m_count; ++i) {
      step_tracker(trackers_[i], adjusted[i]);
    }
    r.confident_fraction /= static_cast<double>(m_count);
  } else {
    step_tracker(trackers_.front(), r.predictions);
  }
  r.prior = trackers_.front().estimate();
  return r;
}

std::vector<BatchResult> run_stream(const Checkpoint& checkpoint, const Stream& stream,
                                    const EngineConfig& config) {
  const int width = checkpoint.model.input_dim();
  for (const auto& b : stream.batches) {
    if (b.features.cols() != width) {
      throw DataError("stream batch " + std::to_string(b.t) + " has " +
                      std::to_string(b.features.cols()) + " feature columns, checkpoint expects " +
                      std::to_string(width));
    }
  }
  Engine engine(checkpoint, config);
  std::vector<BatchResult> out;
  out.reserve(stream.batches.size());
  for (const auto& b : stream.batches) {
    out.push_back(engine.process_batch({b.t, standardize(b.features, checkpoint.standardization)}));
  }
  return out;
}

}  // namespace ftat
