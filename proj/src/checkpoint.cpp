#include "ftat/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "ftat/rng.hpp"

namespace ftat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> to_vec(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

Vector from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void Checkpoint::validate() const {
  schema.validate();
  const auto& dims = model.layer_dims();
  if (dims.size() < 2) {
    throw DataError("checkpoint has no layers");
  }
  if (dims.front() != schema.expanded_width()) {
    throw DataError("checkpoint input width " + std::to_string(dims.front()) +
                    " does not match its schema (" + std::to_string(schema.expanded_width()) +
                    ")");
  }
  if (dims.back() != schema.num_classes() || source_prior.size() != dims.back()) {
    throw DataError("checkpoint class count is inconsistent");
  }
  if (standardization.mean.size() != dims.front() || standardization.sd.size() != dims.front()) {
    throw DataError("checkpoint standardisation width is inconsistent");
  }
  if ((standardization.sd.array() <= 0.0).any()) {
    throw DataError("checkpoint standardisation has non-positive standard deviations");
  }
  if (!model.params().all_finite()) {
    throw DataError("checkpoint parameters are not finite");
  }
}

json Checkpoint::to_json() const {
  json layers = json::array();
  const auto& p = model.params();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const Matrix& w = p.weights[l];
    layers.push_back({{"weights", std::vector<double>(w.data(), w.data() + w.size())},
                      {"bias", to_vec(p.biases[l])}});
  }
  return {{"format", "ftat-checkpoint"},
          {"version", kVersion},
          {"layer_dims", model.layer_dims()},
          {"activation", "relu"},
          {"layers", layers},
          {"source_prior", to_vec(source_prior.values())},
          {"standardization",
           {{"mean", to_vec(standardization.mean)}, {"sd", to_vec(standardization.sd)}}},
          {"class_names", schema.class_names},
          {"schema", schema.to_json()}};
}

Checkpoint Checkpoint::from_json(const json& j) {
  Checkpoint c;
  try {
    if (j.at("format").get<std::string>() != "ftat-checkpoint") {
      throw DataError("not an ftat checkpoint");
    }
    if (j.at("version").get<int>() != kVersion) {
      throw DataError("unsupported checkpoint version " + j.at("version").dump());
    }
    if (j.value("activation", "relu") != "relu") {
      throw DataError("unsupported activation");
    }
    const auto dims = j.at("layer_dims").get<std::vector<int>>();
    MlpModel shape(dims);
    Parameters params = shape.params();
    const auto& layers = j.at("layers");
    if (layers.size() != params.weights.size()) {
      throw DataError("checkpoint layer count does not match layer_dims");
    }
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      const auto w = layers[l].at("weights").get<std::vector<double>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != params.weights[l].size() ||
          static_cast<Eigen::Index>(b.size()) != params.biases[l].size()) {
        throw DataError("parameter count of layer " + std::to_string(l) +
                        " does not match layer_dims");
      }
      std::copy(w.begin(), w.end(), params.weights[l].data());
      params.biases[l] = from_vec(b);
    }
    c.model = MlpModel(dims, std::move(params));
    c.source_prior = ProbVector(from_vec(j.at("source_prior").get<std::vector<double>>()));
    c.standardization.mean = from_vec(j.at("standardization").at("mean").get<std::vector<double>>());
    c.standardization.sd = from_vec(j.at("standardization").at("sd").get<std::vector<double>>());
    c.schema = TableSchema::from_json(j.at("schema"));
    if (j.at("class_names").get<std::vector<std::string>>() != c.schema.class_names) {
      throw DataError("class_names disagree with the embedded schema");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const InvalidInput& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
  c.validate();
  return c;
}

void Checkpoint::save(const fs::path& path) const {
  validate();
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write checkpoint " + path.string());
  }
  out << to_json().dump() << "\n";
}

Checkpoint Checkpoint::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open checkpoint " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

namespace {

double accuracy_of(const MlpModel& model, const Matrix& x, const std::vector<int>& y) {
  if (y.empty()) {
    return 0.0;
  }
  const Matrix logits = model.logits(x);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (argmax(logits.row(i)) == y[static_cast<std::size_t>(i)]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t end) {
  Matrix out(static_cast<Eigen::Index>(end - begin), x.cols());
  for (std::size_t i = begin; i < end; ++i) {
    out.row(static_cast<Eigen::Index>(i - begin)) = x.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

void shuffle(std::vector<std::size_t>& v, Philox& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

}  // namespace

Checkpoint train_source(const Dataset& data, const TrainConfig& config, TrainReport* report) {
  const int k = data.schema.num_classes();
  if (data.labels.size() != static_cast<std::size_t>(data.features.rows()) || data.labels.empty()) {
    throw DataError("training needs one label per row");
  }
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (int y : data.labels) {
    counts[static_cast<std::size_t>(y)] += 1.0;
  }
  if (std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) < 2) {
    throw DataError("training data contains a single class");
  }
  if (config.epochs < 0 || config.batch_size < 1 || !(config.learning_rate > 0.0) ||
      config.holdout < 0.0 || config.holdout >= 1.0) {
    throw InvalidInput("invalid training configuration");
  }

  Checkpoint ckpt;
  ckpt.schema = data.schema;
  ckpt.source_prior = ProbVector(from_vec(counts) / static_cast<double>(data.labels.size()));
  ckpt.standardization = Standardization::fit(data);
  const Matrix x = standardize(data.features, ckpt.standardization);

  Philox rng(config.seed, 0);
  Philox init_rng = rng.substream(1);
  Philox order_rng = rng.substream(2);

  std::vector<std::size_t> idx(data.labels.size());
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx, order_rng);
  const auto n_hold = static_cast<std::size_t>(config.holdout * static_cast<double>(idx.size()));
  const std::size_t n_train = idx.size() - n_hold;
  std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<long>(n_train));
  const Matrix x_hold = gather_rows(x, idx, n_train, idx.size());
  std::vector<int> y_hold;
  for (std::size_t i = n_train; i < idx.size(); ++i) {
    y_hold.push_back(data.labels[idx[i]]);
  }

  std::vector<int> dims = {static_cast<int>(x.cols())};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(k);
  MlpModel model = MlpModel::random(dims, init_rng);
  OptimizerState opt(config.learning_rate, config.rule, config.momentum);

  MlpModel best = model;
  double best_acc = n_hold > 0 ? accuracy_of(model, x_hold, y_hold) : 0.0;
  int best_epoch = 0;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(train_idx, order_rng);
    for (std::size_t start = 0; start < n_train; start += bs) {
      const std::size_t end = std::min(n_train, start + bs);
      const Matrix xb = gather_rows(x, train_idx, start, end);
      std::vector<int> yb;
      for (std::size_t i = start; i < end; ++i) {
        yb.push_back(data.labels[train_idx[i]]);
      }
      apply_update(model, cross_entropy_gradient(model, xb, yb).second, opt);
    }
    if (n_hold > 0) {
      const double acc = accuracy_of(model, x_hold, y_hold);
      if (acc > best_acc) {
        best_acc = acc;
        best = model;
        best_epoch = epoch;
      }
    }
  }
  if (n_hold == 0) {
    best = model;
    best_epoch = config.epochs;
  }
  spdlog::info("source training: best epoch {} (holdout accuracy {:.4f})", best_epoch, best_acc);
  if (report != nullptr) {
    report->best_epoch = best_epoch;
    report->best_holdout_accuracy = best_acc;
    report->final_train_accuracy = accuracy_of(best, x, data.labels);
  }
  ckpt.model = std::move(best);
  ckpt.validate();
  return ckpt;
}

}  // namespace ftat
