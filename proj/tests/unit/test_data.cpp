#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <type_traits>

#include "ftat/data.hpp"

using namespace ftat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TableSchema mixed_schema() {
  TableSchema s;
  s.features = {{"age", FeatureKind::Numeric, {}},
                {"color", FeatureKind::Categorical, {"R", "G", "B"}}};
  s.label = "y";
  s.class_names = {"no", "yes"};
  return s;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string error_of(const fs::path& p, const TableSchema& s) {
  try {
    load_csv(p, s);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("categorical expansion") {
  TempDir dir("ftat_data_expand");
  write(dir.path / "a.csv", "age,color,y\n30,G,yes\n41.5,B,no\n");
  const Dataset d = load_csv(dir.path / "a.csv", mixed_schema());
  REQUIRE(d.features.rows() == 2);
  REQUIRE(d.features.cols() == 4);
  CHECK(d.features(0, 0) == 30.0);
  CHECK(d.features(0, 2) == 1.0);
  CHECK(d.features(1, 3) == 1.0);
  CHECK(d.features.row(1).segment(1, 3).sum() == 1.0);
  CHECK(d.labels == std::vector<int>{1, 0});
  CHECK(mixed_schema().expanded_width() == 4);
  CHECK(mixed_schema().numeric_mask() == std::vector<bool>{true, false, false, false});
}

TEST_CASE("expanded width is numeric count plus level counts") {
  TableSchema s;
  s.label = "c";
  s.class_names = {"a", "b", "c"};
  int expect = 0;
  for (int i = 0; i < 6; ++i) {
    if (i % 2 == 0) {
      s.features.push_back({"n" + std::to_string(i), FeatureKind::Numeric, {}});
      expect += 1;
    } else {
      std::vector<std::string> levels;
      for (int l = 0; l < i + 1; ++l) levels.push_back("L" + std::to_string(l));
      s.features.push_back({"c" + std::to_string(i), FeatureKind::Categorical, levels});
      expect += i + 1;
    }
  }
  CHECK(s.expanded_width() == expect);
}

TEST_CASE("CSV errors name the row and column") {
  TempDir dir("ftat_data_errors");
  std::string body = "age,color,y\n";
  for (int r = 1; r <= 9; ++r) body += std::to_string(20 + r) + "," + (r == 7 ? "Z" : "R") + ",no\n";
  write(dir.path / "level.csv", body);
  const std::string msg = error_of(dir.path / "level.csv", mixed_schema());
  CHECK(msg.find("row 7") != std::string::npos);
  CHECK(msg.find("color") != std::string::npos);
  CHECK(msg.find("'Z'") != std::string::npos);

  write(dir.path / "num.csv", "age,color,y\n30,R,no\nabc,R,no\n");
  const std::string bad = error_of(dir.path / "num.csv", mixed_schema());
  CHECK(bad.find("row 2") != std::string::npos);
  CHECK(bad.find("age") != std::string::npos);

  write(dir.path / "missing.csv", "age,y\n30,no\n");
  CHECK(error_of(dir.path / "missing.csv", mixed_schema()).find("color") != std::string::npos);

  write(dir.path / "empty.csv", "age,color,y\n30,,no\n");
  CHECK(error_of(dir.path / "empty.csv", mixed_schema()).find("missing value") != std::string::npos);

  write(dir.path / "extra.csv", "age,color,y,zip\n30,R,no,1\n");
  CHECK(error_of(dir.path / "extra.csv", mixed_schema()).find("zip") != std::string::npos);

  write(dir.path / "class.csv", "age,color,y\n30,R,maybe\n");
  CHECK(error_of(dir.path / "class.csv", mixed_schema()).find("maybe") != std::string::npos);

  CHECK_THROWS_AS(load_csv(dir.path / "none.csv", mixed_schema()), DataError);
}

TEST_CASE("label column is optional when not required") {
  TempDir dir("ftat_data_nolabel");
  write(dir.path / "u.csv", "color,age\nB,1\n");
  const Dataset d = load_csv(dir.path / "u.csv", mixed_schema(), false);
  CHECK(d.labels.empty());
  CHECK(d.features(0, 0) == 1.0);
  CHECK(d.features(0, 3) == 1.0);
  CHECK_THROWS_AS(load_csv(dir.path / "u.csv", mixed_schema(), true), DataError);
}

TEST_CASE("CSV round trip of a generated table is exact") {
  TempDir dir("ftat_data_roundtrip");
  ShiftSpec spec;
  spec.num_features = 4;
  spec.source_size = 500;
  spec.seed = 3;
  const Dataset d = generate_source(spec);
  write_csv(dir.path / "t.csv", d);
  const Dataset back = load_csv(dir.path / "t.csv", d.schema);
  CHECK(back.features == d.features);
  CHECK(back.labels == d.labels);

  TempDir dir2("ftat_data_roundtrip_mixed");
  write(dir2.path / "m.csv", "age,color,y\n0.1,G,yes\n-3e-7,R,no\n");
  const Dataset m = load_csv(dir2.path / "m.csv", mixed_schema());
  write_csv(dir2.path / "m2.csv", m);
  const Dataset m2 = load_csv(dir2.path / "m2.csv", mixed_schema());
  CHECK(m2.features == m.features);
  CHECK(m2.labels == m.labels);
}

TEST_CASE("schema JSON round trip and validation") {
  TempDir dir("ftat_schema");
  const TableSchema s = mixed_schema();
  s.save(dir.path / "schema.json");
  const TableSchema back = TableSchema::load(dir.path / "schema.json");
  CHECK(back.to_json() == s.to_json());

  auto j = s.to_json();
  j["extra"] = 1;
  CHECK_THROWS_AS(TableSchema::from_json(j), DataError);
  j = s.to_json();
  j["classes"] = {"only"};
  CHECK_THROWS_AS(TableSchema::from_json(j), DataError);
}

TEST_CASE("standardisation") {
  ShiftSpec spec;
  spec.num_features = 3;
  spec.source_size = 1000;
  const Dataset d = generate_source(spec);
  const Standardization st = Standardization::fit(d);
  const Matrix z = standardize(d.features, st);
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double mean = z.col(c).mean();
    const double var = (z.col(c).array() - mean).square().mean();
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-9);
  }

  Dataset flat = d;
  flat.features.col(1).setConstant(4.0);
  const Standardization flat_stats = Standardization::fit(flat);
  CHECK(standardize(flat.features, flat_stats).col(1) == flat.features.col(1));

  CHECK(standardize(z, Standardization::identity(3)) == z);
  CHECK_THROWS_AS(standardize(z, Standardization::identity(2)), DataError);
}

TEST_CASE("one-hot columns are not standardised") {
  TempDir dir("ftat_data_onehot_std");
  write(dir.path / "a.csv", "age,color,y\n30,G,yes\n40,B,no\n50,G,no\n");
  const Dataset d = load_csv(dir.path / "a.csv", mixed_schema());
  const Standardization st = Standardization::fit(d);
  CHECK(st.mean[1] == 0.0);
  CHECK(st.sd[2] == 1.0);
  CHECK(st.mean[0] == 40.0);
}

TEST_CASE("uniform priors give near-uniform class frequencies") {
  ShiftSpec spec;
  spec.num_classes = 3;
  spec.num_features = 3;
  spec.n_batches = 100;
  spec.batch_size = 128;
  const Stream s = generate_synthetic_stream(spec);
  std::vector<double> count(3, 0.0);
  double total = 0.0;
  for (const auto& t : s.truth) {
    for (int l : t.labels) count[l] += 1.0;
    total += static_cast<double>(t.labels.size());
  }
  for (double c : count) CHECK(std::abs(c / total - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("the same seed gives a bitwise identical stream") {
  ShiftSpec spec;
  spec.n_batches = 5;
  spec.batch_size = 64;
  spec.seed = 77;
  const Stream a = generate_synthetic_stream(spec);
  const Stream b = generate_synthetic_stream(spec);
  for (int t = 0; t < 5; ++t) {
    CHECK(a.batches[t].features == b.batches[t].features);
    CHECK(a.truth[t].labels == b.truth[t].labels);
  }
  spec.seed = 78;
  CHECK(generate_synthetic_stream(spec).truth[0].labels != a.truth[0].labels);
}

TEST_CASE("batch frequencies follow a prior ramp") {
  ShiftSpec spec;
  spec.n_batches = 100;
  spec.batch_size = 512;
  spec.priors = ShiftSpec::ramp(ProbVector{0.5, 0.5}, ProbVector{0.9, 0.1}, 100);
  const Stream s = generate_synthetic_stream(spec);
  int outside = 0;
  for (int t = 0; t < 100; ++t) {
    const double p = (*s.truth[t].prior)[0];
    double hits = 0;
    for (int l : s.truth[t].labels) hits += l == 0 ? 1 : 0;
    const double sd = std::sqrt(p * (1 - p) / 512.0);
    // Four binomial standard deviations.
    if (std::abs(hits / 512.0 - p) > 4.0 * sd) ++outside;
  }
  CHECK(outside == 0);
  CHECK((*s.truth[0].prior)[0] == 0.5);
  CHECK((*s.truth[99].prior)[0] == doctest::Approx(0.9));
}

TEST_CASE("covariate translation moves the class means") {
  ShiftSpec spec;
  spec.n_batches = 1;
  spec.batch_size = 20000;
  spec.class_translation = Matrix::Zero(2, 2);
  spec.class_translation(1, 0) = 2.0;
  const Stream s = generate_synthetic_stream(spec);
  double sum = 0.0, n = 0.0;
  for (int i = 0; i < spec.batch_size; ++i) {
    if (s.truth[0].labels[i] == 1) {
      sum += s.batches[0].features(i, 0);
      n += 1.0;
    }
  }
  CHECK(sum / n == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("test batches carry no label or prior fields") {
  // The adaptation-facing type only exposes the step index and features.
  CHECK(std::is_same_v<decltype(Batch::t), int>);
  CHECK(std::is_same_v<decltype(Batch::features), Matrix>);
  struct Mirror {
    int t;
    Matrix features;
  };
  CHECK(sizeof(Batch) == sizeof(Mirror));
}

TEST_CASE("materialised stream reads back") {
  TempDir dir("ftat_data_materialize");
  ShiftSpec spec;
  spec.n_batches = 3;
  spec.batch_size = 32;
  spec.source_size = 50;
  materialize_synthetic(spec, dir.path);
  const TableSchema schema = TableSchema::load(dir.path / "schema.json");
  const Stream back = read_stream_dir(dir.path / "stream", schema);
  const Stream orig = generate_synthetic_stream(spec);
  REQUIRE(back.batches.size() == 3);
  REQUIRE(back.truth.size() == 3);
  for (int t = 0; t < 3; ++t) {
    CHECK(back.batches[t].features == orig.batches[t].features);
    CHECK(back.truth[t].labels == orig.truth[t].labels);
    CHECK(*back.truth[t].prior == *orig.truth[t].prior);
  }
  const Dataset train = load_csv(dir.path / "train.csv", schema);
  CHECK(train.features == generate_source(spec).features);
}

TEST_CASE("single CSV streams are chunked by batch size") {
  TempDir dir("ftat_data_chunk");
  ShiftSpec spec;
  spec.source_size = 70;
  const Dataset d = generate_source(spec);
  write_csv(dir.path / "s.csv", d);
  const Stream s = stream_from_csv(dir.path / "s.csv", d.schema, 32);
  REQUIRE(s.batches.size() == 3);
  CHECK(s.batches[2].features.rows() == 6);
  CHECK(s.batches[1].t == 1);
  CHECK(s.truth[0].labels.size() == 32);
  CHECK_FALSE(s.truth[0].prior);
}

TEST_CASE("shift spec JSON") {
  const auto j = nlohmann::json::parse(R"({
    "num_classes": 2, "num_features": 2, "n_batches": 4, "batch_size": 8, "seed": 1,
    "prior_ramp": {"from": [0.5, 0.5], "to": [0.8, 0.2]},
    "translation": [1.0, -1.0]
  })");
  const ShiftSpec s = ShiftSpec::from_json(j);
  CHECK(s.prior_at(3)[0] == doctest::Approx(0.8));
  CHECK(s.class_translation(1, 1) == -1.0);
  auto bad = j;
  bad["bogus"] = 1;
  CHECK_THROWS_AS(ShiftSpec::from_json(bad), DataError);
}
