#include "ftat/metrics.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>

namespace ftat {

using nlohmann::json;

namespace {

void check_pair(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) {
    throw InvalidInput("prediction and label counts differ");
  }
}

double safe_div(double a, double b) {
  return b > 0.0 ? a / b : 0.0;
}

double f1_for(const std::vector<int>& preds, const std::vector<int>& labels, int cls) {
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == cls;
    const bool y = labels[i] == cls;
    tp += (p && y) ? 1.0 : 0.0;
    fp += (p && !y) ? 1.0 : 0.0;
    fn += (!p && y) ? 1.0 : 0.0;
  }
  const double precision = safe_div(tp, tp + fp);
  const double recall = safe_div(tp, tp + fn);
  return safe_div(2.0 * precision * recall, precision + recall);
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

}  // namespace

double metric_accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  check_pair(preds, labels);
  if (labels.empty()) {
    return 0.0;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    correct += preds[i] == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double metric_balanced_accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  check_pair(preds, labels);
  std::map<int, std::pair<double, double>> per_class;  // class -> (hits, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [hits, total] = per_class[labels[i]];
    total += 1.0;
    hits += preds[i] == labels[i] ? 1.0 : 0.0;
  }
  if (per_class.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& [cls, c] : per_class) {
    sum += c.first / c.second;
  }
  return sum / static_cast<double>(per_class.size());
}

double metric_f1(const std::vector<int>& preds, const std::vector<int>& labels, int num_classes) {
  check_pair(preds, labels);
  if (num_classes == 2) {
    return f1_for(preds, labels, 1);
  }
  std::set<int> classes(labels.begin(), labels.end());
  classes.insert(preds.begin(), preds.end());
  if (classes.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (int c : classes) {
    sum += f1_for(preds, labels, c);
  }
  return sum / static_cast<double>(classes.size());
}

json MetricRecord::to_json() const {
  auto opt = [](const std::optional<double>& v) -> json { return v ? json(*v) : json(nullptr); };
  return {{"t", t},
          {"n", n},
          {"accuracy", opt(accuracy)},
          {"balanced_accuracy", opt(balanced_accuracy)},
          {"f1", opt(f1)},
          {"kl_prior", opt(kl_prior)},
          {"l2_prior_error", opt(l2_prior_error)},
          {"l2_label_shift", opt(l2_label_shift)},
          {"confident_fraction", confident_fraction},
          {"consistent_fraction", consistent_fraction},
          {"mean_sample_weight", mean_sample_weight},
          {"condition", condition},
          {"prior_estimate", prior_estimate},
          {"member_weights", member_weights},
          {"member_losses", member_losses}};
}

MetricRecord make_record(const BatchResult& result, const BatchTruth* truth,
                         const ProbVector& source_prior, int num_classes) {
  MetricRecord rec;
  rec.t = result.t;
  rec.n = result.labels.size();
  rec.confident_fraction = result.confident_fraction;
  rec.consistent_fraction = result.consistent_fraction;
  rec.mean_sample_weight = result.mean_sample_weight;
  rec.condition = std::isfinite(result.condition) ? result.condition : -1.0;
  rec.prior_estimate.assign(result.prior.values().data(),
                            result.prior.values().data() + result.prior.size());
  rec.member_weights = result.member_weights;
  rec.member_losses = result.member_losses;
  if (truth != nullptr) {
    if (!truth->labels.empty()) {
      rec.accuracy = metric_accuracy(result.labels, truth->labels);
      rec.balanced_accuracy = metric_balanced_accuracy(result.labels, truth->labels);
      rec.f1 = metric_f1(result.labels, truth->labels, num_classes);
    }
    if (truth->prior) {
      rec.kl_prior = kl_divergence(*truth->prior, result.prior);
      rec.l2_prior_error = l2_label_distance(*truth->prior, result.prior);
      rec.l2_label_shift = l2_label_distance(*truth->prior, source_prior);
    }
  }
  return rec;
}

void append_records(std::ostream& out, const std::vector<MetricRecord>& records) {
  for (const auto& r : records) {
    out << r.to_json().dump() << "\n";
  }
}

namespace {

// Walks every numeric leaf of a record, in key order, as (name, value).
template <typename F>
void for_each_scalar(const json& rec, F&& f) {
  for (const auto& [key, value] : rec.items()) {
    if (key == "t") {
      continue;
    }
    if (value.is_number()) {
      f(key, value.template get<double>());
    } else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i].is_number()) {
          f(key + "[" + std::to_string(i) + "]", value[i].template get<double>());
        }
      }
    }
  }
}

std::vector<json> read_records(std::istream& log) {
  std::vector<json> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(log, line)) {
    ++row;
    if (line.empty()) {
      continue;
    }
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError("metric log line " + std::to_string(row) + " is not valid JSON");
    }
    if (!out.back().is_object()) {
      throw DataError("metric log line " + std::to_string(row) + " is not an object");
    }
  }
  return out;
}

}  // namespace

std::vector<SummaryRow> summarize_log(std::istream& log) {
  std::map<std::string, std::vector<double>> values;
  std::vector<std::string> order;
  for (const auto& rec : read_records(log)) {
    for_each_scalar(rec, [&](const std::string& name, double v) {
      auto [it, inserted] = values.try_emplace(name);
      if (inserted) {
        order.push_back(name);
      }
      it->second.push_back(v);
    });
  }
  std::vector<SummaryRow> rows;
  for (const auto& name : order) {
    const auto& v = values.at(name);
    double sum = 0.0;
    for (double x : v) {
      sum += x;
    }
    const double mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) {
      sq += (x - mean) * (x - mean);
    }
    rows.push_back({name, v.size(), mean, std::sqrt(sq / static_cast<double>(v.size()))});
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "metric,count,mean,std\n";
  for (const auto& r : rows) {
    out << r.metric << "," << r.count << "," << fmt_double(r.mean) << "," << fmt_double(r.std)
        << "\n";
  }
}

void write_plot_csv(std::istream& log, std::ostream& out) {
  const auto records = read_records(log);
  std::vector<std::string> columns;
  std::set<std::string> seen;
  for (const auto& rec : records) {
    for_each_scalar(rec, [&](const std::string& name, double) {
      if (seen.insert(name).second) {
        columns.push_back(name);
      }
    });
  }
  out << "t";
  for (const auto& c : columns) {
    out << "," << c;
  }
  out << "\n";
  for (const auto& rec : records) {
    std::map<std::string, double> row;
    for_each_scalar(rec, [&](const std::string& name, double v) { row[name] = v; });
    out << rec.value("t", 0);
    for (const auto& c : columns) {
      out << ",";
      if (auto it = row.find(c); it != row.end()) {
        out << fmt_double(it->second);
      }
    }
    out << "\n";
  }
}

}  // namespace ftat
