#include "ftat/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "ftat/checkpoint.hpp"
#include "ftat/config.hpp"
#include "ftat/data.hpp"
#include "ftat/engine.hpp"
#include "ftat/metrics.hpp"

namespace ftat {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFooter =
    "Metrics: accuracy, balanced accuracy (mean recall over classes present in the batch)\n"
    "and F1 (positive class 1 for binary tasks, macro average otherwise).\n"
    "Set FTAT_LOG_LEVEL to trace|debug|info|warn|error|off to change verbosity.";

void setup_logging() {
  static bool done = false;
  if (!done) {
    auto logger = spdlog::stderr_logger_mt("ftat");
    spdlog::set_default_logger(logger);
    done = true;
  }
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("FTAT_LOG_LEVEL")) {
    level = spdlog::level::from_str(env);
  }
  spdlog::set_level(level);
}

Config config_or_default(const std::string& path) {
  return path.empty() ? Config{} : load_config(path);
}

Stream load_stream(const fs::path& path, const TableSchema& schema, int batch_size) {
  if (fs::is_directory(path)) {
    return read_stream_dir(path, schema);
  }
  if (!fs::exists(path)) {
    throw DataError("stream " + path.string() + " does not exist");
  }
  return stream_from_csv(path, schema, batch_size);
}

int adapt(const std::string& ckpt_path, const std::string& stream_path,
          const std::string& config_path, const std::string& log_path, bool append,
          std::optional<Method> forced, std::ostream& out) {
  const Checkpoint ckpt = Checkpoint::load(ckpt_path);
  Config cfg = config_or_default(config_path);
  if (forced) {
    cfg.engine.method = *forced;
  }
  cfg.engine.validate(ckpt.schema.num_classes());
  const Stream stream = load_stream(stream_path, ckpt.schema, cfg.engine.batch_size);
  const int width = ckpt.model.input_dim();
  for (const auto& b : stream.batches) {
    if (b.features.cols() != width) {
      throw DataError("stream batch " + std::to_string(b.t) + " does not match the checkpoint schema");
    }
  }

  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) {
    throw DataError("cannot write metric log " + log_path);
  }
  Engine engine(ckpt, cfg.engine);
  double acc_sum = 0.0;
  std::size_t acc_count = 0;
  for (std::size_t i = 0; i < stream.batches.size(); ++i) {
    const Batch& raw = stream.batches[i];
    const BatchResult r =
        engine.process_batch({raw.t, standardize(raw.features, ckpt.standardization)});
    const BatchTruth* truth = stream.truth.empty() ? nullptr : &stream.truth[i];
    const MetricRecord rec = make_record(r, truth, ckpt.source_prior, ckpt.schema.num_classes());
    log << rec.to_json().dump() << "\n";
    log.flush();
    if (rec.balanced_accuracy) {
      acc_sum += *rec.balanced_accuracy;
      ++acc_count;
    }
  }
  out << "processed " << stream.batches.size() << " batches with " << to_string(cfg.engine.method);
  if (acc_count > 0) {
    out << "; mean balanced accuracy " << acc_sum / static_cast<double>(acc_count);
  }
  out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  setup_logging();

  CLI::App app{"Fully test-time adaptation for tabular classification streams", "ftat"};
  app.footer(kFooter);
  app.require_subcommand(1);

  std::string data_path, schema_path, config_path, out_path;
  auto* train = app.add_subcommand("train", "Train a source MLP and write a checkpoint");
  train->add_option("data", data_path, "Labeled CSV")->required();
  train->add_option("schema", schema_path, "Schema JSON")->required();
  train->add_option("--config", config_path, "Config JSON (defaults if omitted)");
  train->add_option("--out", out_path, "Checkpoint output path")->required();

  std::string spec_path;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic shifted stream");
  synth->add_option("--spec", spec_path, "Shift spec JSON")->required();
  synth->add_option("--out", out_path, "Output directory")->required();

  std::string ckpt_path, stream_path, log_path;
  bool append = false;
  auto* adapt_cmd = app.add_subcommand("adapt", "Adapt a checkpoint on a stream");
  adapt_cmd->add_option("checkpoint", ckpt_path, "Checkpoint JSON")->required();
  adapt_cmd->add_option("stream", stream_path, "Stream directory or CSV")->required();
  adapt_cmd->add_option("--config", config_path, "Config JSON (defaults if omitted)");
  adapt_cmd->add_option("--log", log_path, "Metric log output (JSON lines)")->required();
  adapt_cmd->add_flag("--append", append, "Append to an existing log");

  std::string baseline_kind;
  auto* baseline = app.add_subcommand("baseline", "Run a comparison baseline on a stream");
  baseline->add_option("kind", baseline_kind, "none | entropy")
      ->required()
      ->check(CLI::IsMember({"none", "entropy"}));
  baseline->add_option("checkpoint", ckpt_path, "Checkpoint JSON")->required();
  baseline->add_option("stream", stream_path, "Stream directory or CSV")->required();
  baseline->add_option("--config", config_path, "Config JSON (defaults if omitted)");
  baseline->add_option("--log", log_path, "Metric log output (JSON lines)")->required();
  baseline->add_flag("--append", append, "Append to an existing log");

  std::string metrics_path, plot_path;
  bool summary = false;
  auto* eval = app.add_subcommand("eval", "Summarise a metric log");
  eval->add_option("log", metrics_path, "Metric log (JSON lines)")->required();
  eval->add_flag("--summary", summary, "Print per-metric mean and std as CSV");
  eval->add_option("--out", out_path, "Write the summary CSV here instead of stdout");
  eval->add_option("--plot", plot_path, "Write per-batch plot data CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) {
      const Config cfg = config_or_default(config_path);
      const TableSchema schema = TableSchema::load(schema_path);
      const Dataset data = load_csv(data_path, schema);
      TrainReport report;
      const Checkpoint ckpt = train_source(data, cfg.train, &report);
      ckpt.save(out_path);
      out << "trained " << data.features.rows() << " rows; best epoch " << report.best_epoch
          << ", holdout accuracy " << report.best_holdout_accuracy << "\n";
      return kExitOk;
    }
    if (synth->parsed()) {
      const ShiftSpec spec = ShiftSpec::load(spec_path);
      materialize_synthetic(spec, out_path);
      out << "wrote " << spec.n_batches << " batches to " << out_path << "\n";
      return kExitOk;
    }
    if (adapt_cmd->parsed()) {
      return adapt(ckpt_path, stream_path, config_path, log_path, append, std::nullopt, out);
    }
    if (baseline->parsed()) {
      const Method m = baseline_kind == "none" ? Method::NoAdapt : Method::EntropyMin;
      return adapt(ckpt_path, stream_path, config_path, log_path, append, m, out);
    }
    if (eval->parsed()) {
      if (!summary && plot_path.empty()) {
        err << "eval: nothing to do; pass --summary and/or --plot\n" << app.help();
        return kExitUsage;
      }
      std::ifstream in(metrics_path);
      if (!in) {
        throw DataError("cannot open metric log " + metrics_path);
      }
      if (summary) {
        const auto rows = summarize_log(in);
        if (out_path.empty()) {
          write_summary_csv(out, rows);
        } else {
          std::ofstream f(out_path);
          if (!f) {
            throw DataError("cannot write " + out_path);
          }
          write_summary_csv(f, rows);
        }
      }
      if (!plot_path.empty()) {
        in.clear();
        in.seekg(0);
        std::ofstream f(plot_path);
        if (!f) {
          throw DataError("cannot write " + plot_path);
        }
        write_plot_csv(in, f);
      }
      return kExitOk;
    }
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const SingularMatrix& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace ftat
