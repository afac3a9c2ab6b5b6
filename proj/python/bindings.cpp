#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ftat/cdo.hpp"
#include "ftat/checkpoint.hpp"
#include "ftat/cli.hpp"
#include "ftat/config.hpp"
#include "ftat/dme.hpp"
#include "ftat/engine.hpp"
#include "ftat/lcw.hpp"
#include "ftat/metrics.hpp"

namespace py = pybind11;
using namespace ftat;

namespace {

// ProbVector crosses the boundary as a plain 1-d array.
ProbVector pv(const Vector& v) { return ProbVector(v); }
std::optional<Vector> opt_values(const std::optional<ProbVector>& p) {
  if (!p) return std::nullopt;
  return p->values();
}

nlohmann::json parse(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Test-time adaptation under joint label and covariate shift";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SingularMatrix>(m, "SingularMatrix", PyExc_ArithmeticError);

  // core math
  m.def("softmax", [](const Vector& z) { return softmax(z).values(); }, py::arg("logits"));
  m.def("softmax_rows", &softmax_rows, py::arg("logits"));
  m.def("entropy", [](const Vector& p) { return entropy(pv(p)); }, py::arg("p"));
  m.def("binary_entropy", &binary_entropy, py::arg("p"));
  m.def("margin", [](const Vector& p) { return margin(pv(p)); }, py::arg("p"));
  m.def("pairwise_l2", &pairwise_l2, py::arg("rows"));
  m.def("kl_divergence", [](const Vector& p, const Vector& q) { return kl_divergence(pv(p), pv(q)); },
        py::arg("p"), py::arg("q"));
  m.def("l2_label_distance", [](const Vector& p, const Vector& q) { return l2_label_distance(pv(p), pv(q)); },
        py::arg("p"), py::arg("q"));
  m.def("solve_regularized",
        [](const Matrix& c, const Vector& b, double lambda) { return solve_regularized(SquareMatrix(c), b, lambda); },
        py::arg("c"), py::arg("b"), py::arg("lam"));

  // prior tracking
  m.def("adjust_predictions",
        [](const Matrix& preds, const Vector& prior, const Vector& source) {
          return adjust_predictions(preds, pv(prior), pv(source));
        },
        py::arg("preds"), py::arg("prior"), py::arg("source_prior"));
  m.def("estimate_confident_prior",
        [](const Matrix& preds, double epsilon) -> std::optional<std::pair<Vector, std::size_t>> {
          const auto e = estimate_confident_prior(preds, epsilon);
          if (!e) return std::nullopt;
          return std::make_pair(e->prior.values(), e->count);
        },
        py::arg("preds"), py::arg("epsilon"),
        "(prior, count) over rows with entropy below epsilon, or None.");
  m.def("confusion_matrix", [](const Matrix& preds) { return confusion_matrix(preds).values(); }, py::arg("preds"));
  m.def("debias",
        [](const Matrix& c, const Vector& est, double lambda) {
          return debias(SquareMatrix(c), pv(est), lambda).values();
        },
        py::arg("confusion"), py::arg("estimate"), py::arg("lam"));

  py::class_<PriorTracker>(m, "PriorTracker")
      .def(py::init([](const Vector& p0, double alpha, int sign) { return PriorTracker(pv(p0), alpha, sign); }),
           py::arg("source_prior"), py::arg("alpha"), py::arg("update_sign") = -1)
      .def("update", [](PriorTracker& t, const Vector& d) { t.update(pv(d)); }, py::arg("debiased"))
      .def("step",
           [](PriorTracker& t, const Matrix& adjusted, double epsilon, double lambda) {
             return update_tracker(t, adjusted, epsilon, lambda).updated;
           },
           py::arg("adjusted"), py::arg("epsilon"), py::arg("lam"),
           "Full step from adjusted predictions; False when no row was confident.")
      .def_property_readonly("estimate", [](const PriorTracker& t) { return t.estimate().values(); })
      .def_property_readonly("accumulator", &PriorTracker::accumulator)
      .def_property_readonly("alpha", &PriorTracker::alpha)
      .def_property_readonly("update_sign", &PriorTracker::update_sign);

  // neighbourhood weighting
  m.def("mean_pairwise_distance", &mean_pairwise_distance, py::arg("features"));
  m.def("neighborhoods", &neighborhoods, py::arg("features"));
  m.def("local_consistent_weights",
        [](const Matrix& x, const Matrix& indicator_preds, const Matrix& adjusted, double beta) {
          const auto r = local_consistent_weights(x, indicator_preds, adjusted, beta);
          py::dict d;
          d["neighbors"] = r.neighbors;
          d["mean_distance"] = r.mean_distance;
          d["indicators"] = r.indicators;
          d["weights"] = r.weights;
          return d;
        },
        py::arg("features"), py::arg("indicator_preds"), py::arg("adjusted"), py::arg("beta"));

  // ensemble
  m.def("member_loss", py::overload_cast<const Matrix&, const Vector&>(&member_loss), py::arg("adjusted"),
        py::arg("sample_weights"));
  m.def("compute_weights", [](const std::vector<double>& losses) { return compute_weights(losses).values(); },
        py::arg("losses"));
  m.def("ensemble_predict",
        [](const std::vector<Matrix>& preds, const Vector& w) { return ensemble_predict(preds, pv(w)); },
        py::arg("member_preds"), py::arg("weights"));

  // metrics
  m.def("accuracy", &metric_accuracy, py::arg("preds"), py::arg("labels"));
  m.def("balanced_accuracy", &metric_balanced_accuracy, py::arg("preds"), py::arg("labels"));
  m.def("f1", &metric_f1, py::arg("preds"), py::arg("labels"), py::arg("num_classes"));

  // models and data
  py::class_<MlpModel>(m, "MlpModel")
      .def_property_readonly("layer_dims", &MlpModel::layer_dims)
      .def("logits", &MlpModel::logits, py::arg("x"))
      .def("predict_proba", &MlpModel::predict_proba, py::arg("x"));

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("features", &Dataset::features)
      .def_readonly("labels", &Dataset::labels)
      .def_property_readonly("class_names", [](const Dataset& d) { return d.schema.class_names; });

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_static("load", &Checkpoint::load, py::arg("path"))
      .def("save", &Checkpoint::save, py::arg("path"))
      .def_readonly("model", &Checkpoint::model)
      .def_property_readonly("source_prior", [](const Checkpoint& c) { return c.source_prior.values(); })
      .def_property_readonly("class_names", &Checkpoint::class_names)
      .def("standardize", [](const Checkpoint& c, const Matrix& x) { return standardize(x, c.standardization); },
           py::arg("features"));

  py::class_<Stream>(m, "Stream")
      .def("__len__", [](const Stream& s) { return s.batches.size(); })
      .def("features", [](const Stream& s, std::size_t t) { return s.batches.at(t).features; }, py::arg("t"))
      .def("labels", [](const Stream& s, std::size_t t) { return s.truth.at(t).labels; }, py::arg("t"))
      .def("prior", [](const Stream& s, std::size_t t) { return opt_values(s.truth.at(t).prior); }, py::arg("t"));

  m.def("generate_source", [](const std::string& spec) { return generate_source(ShiftSpec::from_json(parse(spec))); },
        py::arg("spec_json"));
  m.def("generate_stream",
        [](const std::string& spec) { return generate_synthetic_stream(ShiftSpec::from_json(parse(spec))); },
        py::arg("spec_json"));
  m.def("load_stream",
        [](const std::filesystem::path& dir, const std::filesystem::path& schema) {
          return read_stream_dir(dir, TableSchema::load(schema));
        },
        py::arg("stream_dir"), py::arg("schema_path"));

  // config and training
  py::class_<EngineConfig>(m, "EngineConfig")
      .def_readonly("alpha", &EngineConfig::alpha)
      .def_readonly("epsilon", &EngineConfig::epsilon)
      .def_readonly("update_sign", &EngineConfig::update_sign)
      .def_readonly("lam", &EngineConfig::lambda)
      .def_readonly("beta", &EngineConfig::beta)
      .def_readonly("learning_rates", &EngineConfig::learning_rates)
      .def_readonly("steps_per_batch", &EngineConfig::steps_per_batch)
      .def_readonly("batch_size", &EngineConfig::batch_size)
      .def_property_readonly("method", [](const EngineConfig& c) { return to_string(c.method); });
  py::class_<TrainConfig>(m, "TrainConfig")
      .def_readonly("hidden", &TrainConfig::hidden)
      .def_readonly("epochs", &TrainConfig::epochs)
      .def_readonly("seed", &TrainConfig::seed);
  py::class_<Config>(m, "Config").def_readonly("train", &Config::train).def_readonly("engine", &Config::engine);

  m.def("config_from_json", [](const std::string& text) { return config_from_json(parse(text)); },
        py::arg("config_json"));
  m.def("load_config", &load_config, py::arg("path"));
  m.def("train_source", [](const Dataset& d, const Config& c) { return train_source(d, c.train); }, py::arg("data"),
        py::arg("config"));

  // adaptation
  py::class_<BatchResult>(m, "BatchResult")
      .def_readonly("t", &BatchResult::t)
      .def_readonly("predictions", &BatchResult::predictions)
      .def_readonly("labels", &BatchResult::labels)
      .def_property_readonly("prior_used", [](const BatchResult& r) { return r.prior_used.values(); })
      .def_property_readonly("prior", [](const BatchResult& r) { return r.prior.values(); })
      .def_readonly("member_weights", &BatchResult::member_weights)
      .def_readonly("member_losses", &BatchResult::member_losses)
      .def_readonly("confident_fraction", &BatchResult::confident_fraction)
      .def_readonly("consistent_fraction", &BatchResult::consistent_fraction)
      .def_readonly("tracker_updated", &BatchResult::tracker_updated);

  py::class_<Engine>(m, "Engine")
      .def(py::init([](const Checkpoint& ck, const Config& c) { return Engine(ck, c.engine); }), py::arg("checkpoint"),
           py::arg("config"))
      .def("process_batch",
           [](Engine& e, const Matrix& features, int t) { return e.process_batch(Batch{t, features}); },
           py::arg("features"), py::arg("t") = 0, "Features must already be standardised.")
      .def_property_readonly("prior", [](const Engine& e) { return e.tracker().estimate().values(); });

  m.def("run_stream", [](const Checkpoint& ck, const Stream& s, const Config& c) { return run_stream(ck, s, c.engine); },
        py::arg("checkpoint"), py::arg("stream"), py::arg("config"));

  m.def("run_cli",
        [](std::vector<std::string> args) {
          args.insert(args.begin(), "ftat");
          std::vector<const char*> argv;
          for (const auto& a : args) argv.push_back(a.c_str());
          std::ostringstream out, err;
          const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line tool in-process; returns (exit_code, stdout, stderr).");
}
