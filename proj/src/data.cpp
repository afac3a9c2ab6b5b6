#include "ftat/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "ftat/rng.hpp"

namespace ftat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  for (auto& s : cells) {
    const auto first = s.find_first_not_of(" \t");
    const auto last = s.find_last_not_of(" \t");
    s = first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
  }
  return cells;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += "\"\"";
    } else {
      out.push_back(c);
    }
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    throw DataError("cannot format value");
  }
  return std::string(buf, end);
}

std::string where(const fs::path& path, std::size_t row, const std::string& column) {
  return path.string() + ": row " + std::to_string(row) + " (line " + std::to_string(row + 1) +
         "), column '" + column + "'";
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().empty()) {
    lines.pop_back();
  }
  return lines;
}

}  // namespace

// ---- schema ----------------------------------------------------------------

void TableSchema::validate() const {
  if (features.empty()) {
    throw DataError("schema has no features");
  }
  if (class_names.size() < 2) {
    throw DataError("schema needs at least two classes");
  }
  std::set<std::string> names;
  for (const auto& f : features) {
    if (f.name.empty()) {
      throw DataError("schema has a feature with an empty name");
    }
    if (!names.insert(f.name).second) {
      throw DataError("duplicate feature '" + f.name + "'");
    }
    if (f.kind == FeatureKind::Categorical) {
      if (f.levels.empty()) {
        throw DataError("categorical feature '" + f.name + "' has no levels");
      }
      std::set<std::string> lv(f.levels.begin(), f.levels.end());
      if (lv.size() != f.levels.size()) {
        throw DataError("categorical feature '" + f.name + "' has duplicate levels");
      }
    }
  }
  if (names.count(label) != 0) {
    throw DataError("label column '" + label + "' is also listed as a feature");
  }
  std::set<std::string> cls(class_names.begin(), class_names.end());
  if (cls.size() != class_names.size()) {
    throw DataError("duplicate class names");
  }
}

int TableSchema::expanded_width() const {
  int w = 0;
  for (const auto& f : features) {
    w += f.kind == FeatureKind::Numeric ? 1 : static_cast<int>(f.levels.size());
  }
  return w;
}

std::vector<bool> TableSchema::numeric_mask() const {
  std::vector<bool> mask;
  for (const auto& f : features) {
    if (f.kind == FeatureKind::Numeric) {
      mask.push_back(true);
    } else {
      mask.insert(mask.end(), f.levels.size(), false);
    }
  }
  return mask;
}

json TableSchema::to_json() const {
  json feats = json::array();
  for (const auto& f : features) {
    json jf = {{"name", f.name},
               {"kind", f.kind == FeatureKind::Numeric ? "numeric" : "categorical"}};
    if (f.kind == FeatureKind::Categorical) {
      jf["levels"] = f.levels;
    }
    feats.push_back(jf);
  }
  return {{"features", feats}, {"label", label}, {"classes", class_names}};
}

TableSchema TableSchema::from_json(const json& j) {
  TableSchema s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "features" && key != "label" && key != "classes") {
        throw DataError("unknown schema key '" + key + "'");
      }
    }
    for (const auto& jf : j.at("features")) {
      FeatureSpec f;
      f.name = jf.at("name").get<std::string>();
      const std::string kind = jf.value("kind", "numeric");
      if (kind == "numeric") {
        f.kind = FeatureKind::Numeric;
      } else if (kind == "categorical") {
        f.kind = FeatureKind::Categorical;
        f.levels = jf.at("levels").get<std::vector<std::string>>();
      } else {
        throw DataError("feature '" + f.name + "' has unknown kind '" + kind + "'");
      }
      s.features.push_back(std::move(f));
    }
    s.label = j.at("label").get<std::string>();
    s.class_names = j.at("classes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed schema: ") + e.what());
  }
  s.validate();
  return s;
}

TableSchema TableSchema::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open schema " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("schema " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void TableSchema::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << to_json().dump(2) << "\n";
}

// ---- CSV -----------------------------------------------------------------

Dataset load_csv(const fs::path& path, const TableSchema& schema, bool require_label) {
  schema.validate();
  const auto lines = read_lines(path);
  if (lines.empty()) {
    throw DataError(path.string() + ": missing header row");
  }
  const auto header = split_csv_line(lines.front());
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col.emplace(header[i], i).second) {
      throw DataError(path.string() + ": duplicate column '" + header[i] + "'");
    }
  }
  std::set<std::string> known;
  for (const auto& f : schema.features) {
    known.insert(f.name);
    if (!col.count(f.name)) {
      throw DataError(path.string() + ": missing column '" + f.name + "'");
    }
  }
  known.insert(schema.label);
  for (const auto& h : header) {
    if (!known.count(h)) {
      throw DataError(path.string() + ": unexpected column '" + h + "'");
    }
  }
  const bool has_label = col.count(schema.label) != 0;
  if (require_label && !has_label) {
    throw DataError(path.string() + ": missing label column '" + schema.label + "'");
  }

  Dataset data;
  data.schema = schema;
  const auto n = static_cast<Eigen::Index>(lines.size() - 1);
  data.features = Matrix::Zero(n, schema.expanded_width());
  std::map<std::string, int> class_index;
  for (std::size_t k = 0; k < schema.class_names.size(); ++k) {
    class_index[schema.class_names[k]] = static_cast<int>(k);
  }

  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    if (cells.size() != header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(r) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    const auto i = static_cast<Eigen::Index>(r - 1);
    Eigen::Index c = 0;
    for (const auto& f : schema.features) {
      const std::string& cell = cells[col.at(f.name)];
      if (cell.empty()) {
        throw DataError(where(path, r, f.name) + ": missing value");
      }
      if (f.kind == FeatureKind::Numeric) {
        double v = 0.0;
        auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(v)) {
          throw DataError(where(path, r, f.name) + ": cannot parse '" + cell + "' as a number");
        }
        data.features(i, c++) = v;
      } else {
        const auto it = std::find(f.levels.begin(), f.levels.end(), cell);
        if (it == f.levels.end()) {
          throw DataError(where(path, r, f.name) + ": unknown level '" + cell + "'");
        }
        data.features(i, c + (it - f.levels.begin())) = 1.0;
        c += static_cast<Eigen::Index>(f.levels.size());
      }
    }
    if (has_label) {
      const std::string& cell = cells[col.at(schema.label)];
      const auto it = class_index.find(cell);
      if (it == class_index.end()) {
        throw DataError(where(path, r, schema.label) + ": unknown class '" + cell + "'");
      }
      data.labels.push_back(it->second);
    }
  }
  return data;
}

void write_csv(const fs::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  const bool with_labels = !data.labels.empty();
  std::string line;
  for (const auto& f : data.schema.features) {
    line += (line.empty() ? "" : ",") + quote_if_needed(f.name);
  }
  if (with_labels) {
    line += "," + quote_if_needed(data.schema.label);
  }
  out << line << "\n";
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    line.clear();
    Eigen::Index c = 0;
    for (const auto& f : data.schema.features) {
      if (!line.empty()) {
        line += ",";
      }
      if (f.kind == FeatureKind::Numeric) {
        line += format_double(data.features(i, c++));
      } else {
        Eigen::Index hot = -1;
        for (std::size_t l = 0; l < f.levels.size(); ++l) {
          if (data.features(i, c + static_cast<Eigen::Index>(l)) == 1.0) {
            hot = static_cast<Eigen::Index>(l);
          }
        }
        if (hot < 0) {
          throw DataError("row " + std::to_string(i + 1) + " has no active level for '" +
                          f.name + "'");
        }
        line += quote_if_needed(f.levels[static_cast<std::size_t>(hot)]);
        c += static_cast<Eigen::Index>(f.levels.size());
      }
    }
    if (with_labels) {
      line += "," + quote_if_needed(
                        data.schema.class_names[static_cast<std::size_t>(data.labels[i])]);
    }
    out << line << "\n";
  }
}

// ---- standardisation ------------------------------------------------------

Standardization Standardization::identity(Eigen::Index width) {
  return {Vector::Zero(width), Vector::Ones(width)};
}

Standardization Standardization::fit(const Dataset& data) {
  const Eigen::Index w = data.features.cols();
  Standardization s = identity(w);
  const auto mask = data.schema.numeric_mask();
  const auto n = static_cast<double>(data.features.rows());
  if (data.features.rows() == 0) {
    return s;
  }
  for (Eigen::Index c = 0; c < w; ++c) {
    if (!mask[static_cast<std::size_t>(c)]) {
      continue;
    }
    const double mean = data.features.col(c).mean();
    const double var = (data.features.col(c).array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) {
      spdlog::warn("column {} is constant in the training data; passing it through", c);
      continue;
    }
    s.mean[c] = mean;
    s.sd[c] = sd;
  }
  return s;
}

Matrix standardize(const Matrix& features, const Standardization& stats) {
  if (stats.mean.size() != features.cols() || stats.sd.size() != features.cols()) {
    throw DataError("standardisation statistics have " + std::to_string(stats.mean.size()) +
                    " columns, data has " + std::to_string(features.cols()));
  }
  Matrix out = features;
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    if (!(stats.sd[c] > 0.0)) {
      spdlog::warn("column {} has zero standard deviation; passing it through", c);
      continue;
    }
    if (stats.mean[c] == 0.0 && stats.sd[c] == 1.0) {
      continue;
    }
    out.col(c) = (features.col(c).array() - stats.mean[c]) / stats.sd[c];
  }
  return out;
}

Dataset standardize(const Dataset& data, const Standardization& stats) {
  Dataset out = data;
  out.features = standardize(data.features, stats);
  return out;
}

// ---- synthetic streams ---------------------------------------------------------

void ShiftSpec::validate() const {
  if (num_classes < 2) {
    throw DataError("shift spec needs at least two classes");
  }
  if (num_features < 1) {
    throw DataError("shift spec needs at least one feature");
  }
  if (batch_size < 1) {
    throw DataError("batch_size must be >= 1");
  }
  if (n_batches < 0) {
    throw DataError("n_batches must be >= 0");
  }
  if (class_means.size() == 0 && num_classes > num_features) {
    throw DataError("default class means need num_features >= num_classes");
  }
  if (class_means.size() != 0 &&
      (class_means.rows() != num_classes || class_means.cols() != num_features)) {
    throw DataError("class_means must be num_classes x num_features");
  }
  if (class_translation.size() != 0 &&
      (class_translation.rows() != num_classes || class_translation.cols() != num_features)) {
    throw DataError("class translation must be num_classes x num_features");
  }
  if (class_scale.size() != 0 &&
      (class_scale.size() != num_classes || (class_scale.array() <= 0.0).any())) {
    throw DataError("class scale must have num_classes positive entries");
  }
  if (!(noise_sd > 0.0)) {
    throw DataError("noise_sd must be positive");
  }
  if (!priors.empty() && static_cast<int>(priors.size()) != n_batches) {
    throw DataError("prior sequence length must equal n_batches");
  }
  for (const auto& p : priors) {
    if (p.size() != num_classes) {
      throw DataError("prior length does not match num_classes");
    }
  }
  if (source_prior && source_prior->size() != num_classes) {
    throw DataError("source prior length does not match num_classes");
  }
}

ProbVector ShiftSpec::prior_at(int t) const {
  if (priors.empty()) {
    return ProbVector::uniform(num_classes);
  }
  return priors.at(static_cast<std::size_t>(t));
}

Matrix ShiftSpec::means() const {
  if (class_means.size() != 0) {
    return class_means;
  }
  Matrix m = Matrix::Zero(num_classes, num_features);
  for (int k = 0; k < num_classes; ++k) {
    m(k, k) = separation;
  }
  return m;
}

std::vector<ProbVector> ShiftSpec::ramp(const ProbVector& from, const ProbVector& to, int n) {
  if (from.size() != to.size()) {
    throw DataError("ramp endpoints differ in length");
  }
  std::vector<ProbVector> out;
  for (int t = 0; t < n; ++t) {
    const double s = n > 1 ? static_cast<double>(t) / static_cast<double>(n - 1) : 0.0;
    out.push_back(ProbVector::normalized((1.0 - s) * from.values() + s * to.values()));
  }
  return out;
}

namespace {

Matrix json_matrix(const json& j, const std::string& what) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) {
    return {};
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) {
      throw DataError(what + " rows differ in length");
    }
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return m;
}

ProbVector json_prob(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return ProbVector(Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))));
}

}  // namespace

ShiftSpec ShiftSpec::from_json(const json& j) {
  static const std::set<std::string> keys = {
      "num_classes", "num_features", "n_batches",   "batch_size",     "seed",
      "class_means", "separation",   "noise_sd",    "priors",         "prior_ramp",
      "translation", "class_translation", "class_scale", "ramp_covariate", "source_size",
      "source_prior"};
  ShiftSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (!keys.count(key)) {
        throw DataError("unknown shift spec key '" + key + "'");
      }
    }
    s.num_classes = j.value("num_classes", s.num_classes);
    s.num_features = j.value("num_features", s.num_features);
    s.n_batches = j.value("n_batches", s.n_batches);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.seed = j.value("seed", s.seed);
    s.separation = j.value("separation", s.separation);
    s.noise_sd = j.value("noise_sd", s.noise_sd);
    s.ramp_covariate = j.value("ramp_covariate", s.ramp_covariate);
    s.source_size = j.value("source_size", s.source_size);
    if (j.contains("class_means")) {
      s.class_means = json_matrix(j.at("class_means"), "class_means");
    }
    if (j.contains("priors") && j.contains("prior_ramp")) {
      throw DataError("give either priors or prior_ramp, not both");
    }
    if (j.contains("priors")) {
      for (const auto& p : j.at("priors")) {
        s.priors.push_back(json_prob(p));
      }
    }
    if (j.contains("prior_ramp")) {
      const auto& r = j.at("prior_ramp");
      s.priors = ramp(json_prob(r.at("from")), json_prob(r.at("to")), s.n_batches);
    }
    if (j.contains("translation") && j.contains("class_translation")) {
      throw DataError("give either translation or class_translation, not both");
    }
    if (j.contains("translation")) {
      const auto v = j.at("translation").get<std::vector<double>>();
      s.class_translation = Matrix(s.num_classes, static_cast<Eigen::Index>(v.size()));
      for (int k = 0; k < s.num_classes; ++k) {
        for (std::size_t c = 0; c < v.size(); ++c) {
          s.class_translation(k, static_cast<Eigen::Index>(c)) = v[c];
        }
      }
    }
    if (j.contains("class_translation")) {
      s.class_translation = json_matrix(j.at("class_translation"), "class_translation");
    }
    if (j.contains("class_scale")) {
      const auto v = j.at("class_scale").get<std::vector<double>>();
      s.class_scale = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (j.contains("source_prior")) {
      s.source_prior = json_prob(j.at("source_prior"));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed shift spec: ") + e.what());
  } catch (const InvalidInput& e) {
    throw DataError(std::string("malformed shift spec: ") + e.what());
  }
  s.validate();
  return s;
}

ShiftSpec ShiftSpec::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open shift spec " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("shift spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

TableSchema synthetic_schema(int num_classes, int num_features) {
  TableSchema s;
  for (int c = 0; c < num_features; ++c) {
    s.features.push_back({"x" + std::to_string(c), FeatureKind::Numeric, {}});
  }
  s.label = "label";
  for (int k = 0; k < num_classes; ++k) {
    s.class_names.push_back(std::to_string(k));
  }
  return s;
}

namespace {

constexpr std::uint64_t kSourceStream = 0xFFFF'FFFF'0000'0001ull;

int draw_class(Philox& rng, const ProbVector& prior) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (Eigen::Index k = 0; k + 1 < prior.size(); ++k) {
    cum += prior[k];
    if (u < cum) {
      return static_cast<int>(k);
    }
  }
  return static_cast<int>(prior.size() - 1);
}

// Labels come from a dedicated substream so the label sequence does not
// depend on how many normals the feature draws consume.
void sample_rows(const ShiftSpec& spec, std::uint64_t stream, int n, const ProbVector& prior,
                 double shift_fraction, Matrix& x, std::vector<int>& y) {
  Philox base(spec.seed, stream);
  Philox label_rng = base.substream(0);
  Philox feature_rng = base.substream(1);
  const Matrix means = spec.means();
  x.resize(n, spec.num_features);
  y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = draw_class(label_rng, prior);
  }
  for (int i = 0; i < n; ++i) {
    const int k = y[static_cast<std::size_t>(i)];
    const double scale = spec.class_scale.size() ? spec.class_scale[k] : 1.0;
    for (int c = 0; c < spec.num_features; ++c) {
      double v = means(k, c) + scale * spec.noise_sd * feature_rng.normal();
      if (spec.class_translation.size() != 0) {
        v += shift_fraction * spec.class_translation(k, c);
      }
      x(i, c) = v;
    }
  }
}

}  // namespace

Dataset generate_source(const ShiftSpec& spec) {
  spec.validate();
  ShiftSpec unshifted = spec;
  unshifted.class_translation = Matrix();
  unshifted.class_scale = Vector();
  Dataset d;
  d.schema = synthetic_schema(spec.num_classes, spec.num_features);
  sample_rows(unshifted, kSourceStream, spec.source_size,
              spec.source_prior.value_or(ProbVector::uniform(spec.num_classes)), 0.0,
              d.features, d.labels);
  return d;
}

Stream generate_synthetic_stream(const ShiftSpec& spec) {
  spec.validate();
  Stream s;
  for (int t = 0; t < spec.n_batches; ++t) {
    const ProbVector prior = spec.prior_at(t);
    double frac = 1.0;
    if (spec.ramp_covariate) {
      frac = spec.n_batches > 1 ? static_cast<double>(t) / (spec.n_batches - 1) : 0.0;
    }
    Batch b;
    b.t = t;
    BatchTruth truth;
    truth.t = t;
    truth.prior = prior;
    sample_rows(spec, static_cast<std::uint64_t>(t), spec.batch_size, prior, frac, b.features,
                truth.labels);
    s.batches.push_back(std::move(b));
    s.truth.push_back(std::move(truth));
  }
  return s;
}

void materialize_synthetic(const ShiftSpec& spec, const fs::path& out_dir) {
  const fs::path stream_dir = out_dir / "stream";
  fs::create_directories(stream_dir);
  const TableSchema schema = synthetic_schema(spec.num_classes, spec.num_features);
  schema.save(out_dir / "schema.json");
  write_csv(out_dir / "train.csv", generate_source(spec));

  const Stream stream = generate_synthetic_stream(spec);
  std::ofstream truth(stream_dir / "truth.jsonl");
  if (!truth) {
    throw DataError("cannot write " + (stream_dir / "truth.jsonl").string());
  }
  for (std::size_t i = 0; i < stream.batches.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "batch_%05d.csv", stream.batches[i].t);
    write_csv(stream_dir / name, Dataset{schema, stream.batches[i].features, {}});
    const auto& p = stream.truth[i].prior->values();
    json rec = {{"t", stream.truth[i].t},
                {"prior", std::vector<double>(p.data(), p.data() + p.size())},
                {"labels", stream.truth[i].labels}};
    truth << rec.dump() << "\n";
  }
}

Stream read_stream_dir(const fs::path& dir, const TableSchema& schema) {
  if (!fs::is_directory(dir)) {
    throw DataError("stream directory " + dir.string() + " does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("batch_", 0) == 0 &&
        entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  Stream s;
  for (std::size_t i = 0; i < files.size(); ++i) {
    Dataset d = load_csv(files[i], schema, /*require_label=*/false);
    s.batches.push_back({static_cast<int>(i), std::move(d.features)});
  }
  const fs::path truth_path = dir / "truth.jsonl";
  if (fs::exists(truth_path)) {
    std::ifstream in(truth_path);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) {
        continue;
      }
      ++row;
      try {
        const json j = json::parse(line);
        BatchTruth t;
        t.t = j.at("t").get<int>();
        t.labels = j.at("labels").get<std::vector<int>>();
        if (j.contains("prior")) {
          t.prior = json_prob(j.at("prior"));
        }
        for (int y : t.labels) {
          if (y < 0 || y >= schema.num_classes()) {
            throw DataError("label out of range");
          }
        }
        s.truth.push_back(std::move(t));
      } catch (const std::exception& e) {
        throw DataError(truth_path.string() + ": record " + std::to_string(row) + ": " +
                        e.what());
      }
    }
    if (s.truth.size() != s.batches.size()) {
      throw DataError(truth_path.string() + " has " + std::to_string(s.truth.size()) +
                      " records for " + std::to_string(s.batches.size()) + " batches");
    }
    for (std::size_t i = 0; i < s.truth.size(); ++i) {
      if (static_cast<Eigen::Index>(s.truth[i].labels.size()) != s.batches[i].features.rows()) {
        throw DataError(truth_path.string() + ": label count mismatch for batch " +
                        std::to_string(i));
      }
    }
  }
  return s;
}

Stream stream_from_csv(const fs::path& path, const TableSchema& schema, int batch_size) {
  if (batch_size < 1) {
    throw DataError("batch_size must be >= 1");
  }
  const Dataset d = load_csv(path, schema, /*require_label=*/false);
  Stream s;
  const Eigen::Index n = d.features.rows();
  int t = 0;
  for (Eigen::Index start = 0; start < n; start += batch_size, ++t) {
    const Eigen::Index len = std::min<Eigen::Index>(batch_size, n - start);
    s.batches.push_back({t, d.features.middleRows(start, len)});
    if (!d.labels.empty()) {
      BatchTruth truth;
      truth.t = t;
      truth.labels.assign(d.labels.begin() + start, d.labels.begin() + start + len);
      s.truth.push_back(std::move(truth));
    }
  }
  return s;
}

}  // namespace ftat
