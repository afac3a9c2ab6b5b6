#include <doctest.h>

#include <cmath>
#include <limits>

#include "ftat/backbone.hpp"
#include "ftat/checkpoint.hpp"
#include "ftat/rng.hpp"
#include "oracles.hpp"

using namespace ftat;
using doctest::Approx;

namespace {

Vector ones(Eigen::Index n) { return Vector::Ones(n); }

}  // namespace

TEST_CASE("zero parameters give uniform predictions") {
  MlpModel m({3, 4, 2});
  const Matrix x = Matrix::Random(5, 3);
  CHECK(m.logits(x).isZero(0.0));
  const Matrix p = m.predict_proba(x);
  CHECK((p.array() == 0.5).all());
}

TEST_CASE("single identity layer maps e_1 to e_1") {
  Parameters p;
  p.weights = {Matrix::Identity(3, 3)};
  p.biases = {Vector::Zero(3)};
  MlpModel m({3, 3}, p);
  Matrix x = Matrix::Zero(1, 3);
  x(0, 0) = 1.0;
  CHECK(m.logits(x) == x);
}

TEST_CASE("forward matches the hand-rolled oracle") {
  Philox rng(11, 0);
  const MlpModel m = MlpModel::random({5, 7, 3}, rng);
  const Matrix x = oracle::random_matrix(rng, 4, 5);
  const Matrix z = m.logits(x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto ref = oracle::forward(m, oracle::to_rows(x)[i]);
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(z(i, k) - ref[k]) <= 1e-12);
    }
  }
  CHECK(m.logits(x) == z);
}

TEST_CASE("shape errors") {
  CHECK_THROWS_AS(MlpModel({3}), InvalidInput);
  MlpModel m({3, 2});
  CHECK_THROWS_AS(m.logits(Matrix::Zero(2, 4)), InvalidInput);
  Parameters bad;
  bad.weights = {Matrix::Zero(2, 2)};
  bad.biases = {Vector::Zero(2)};
  CHECK_THROWS_AS(MlpModel({3, 2}, bad), InvalidInput);
}

TEST_CASE("weighted_entropy_loss examples") {
  Philox rng(12, 0);
  const MlpModel m = MlpModel::random({4, 6, 3}, rng);
  const Matrix x = oracle::random_matrix(rng, 8, 4);
  CHECK(weighted_entropy_loss(m, x, Vector::Zero(8), ones(3)) == 0.0);

  MlpModel flat({4, 6, 3});
  CHECK(weighted_entropy_loss(flat, x, ones(8), ones(3)) == Approx(std::log(3.0)).epsilon(1e-14));

  Vector w(8);
  for (int i = 0; i < 8; ++i) w[i] = rng.uniform();
  Vector adj(3);
  adj << 1.4, 0.5, 1.1;
  CHECK(weighted_entropy_loss(m, x, w, adj) == Approx(oracle::loss(m, x, w, adj)).epsilon(1e-12));
}

TEST_CASE("loss is invariant to row permutation and linear in the weights") {
  Philox rng(13, 0);
  const MlpModel m = MlpModel::random({3, 5, 4}, rng);
  const Matrix x = oracle::random_matrix(rng, 6, 3);
  Vector w(6), adj(4);
  for (int i = 0; i < 6; ++i) w[i] = rng.uniform();
  adj << 0.5, 1.5, 1.0, 2.0;

  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.indices() << 3, 0, 5, 1, 4, 2;
  const Matrix xp = perm * x;
  const Vector wp = perm * w;
  CHECK(weighted_entropy_loss(m, xp, wp, adj) ==
        Approx(weighted_entropy_loss(m, x, w, adj)).epsilon(1e-14));

  const double c = 4.0;  // a power of two keeps the scaling exact
  const auto [l1, g1] = loss_and_gradient(m, x, w, adj);
  const auto [l2, g2] = loss_and_gradient(m, x, c * w, adj);
  CHECK(l2 == c * l1);
  CHECK(g2.flatten() == c * g1.flatten());
}

TEST_CASE("gradient vanishes at the uniform stationary point and for zero weights") {
  Philox rng(14, 0);
  MlpModel flat({3, 4, 2});
  const Matrix x = oracle::random_matrix(rng, 5, 3);
  const Parameters g = loss_gradient(flat, x, ones(5), ones(2));
  CHECK(g.weights.back().isZero(0.0));
  CHECK(g.biases.back().isZero(0.0));

  const MlpModel m = MlpModel::random({3, 4, 2}, rng);
  CHECK(loss_gradient(m, x, Vector::Zero(5), ones(2)).flatten().isZero(0.0));
}

TEST_CASE("analytic gradient matches central differences") {
  Philox rng(15, 0);
  const MlpModel m = MlpModel::random({5, 6, 3}, rng);
  const Matrix x = oracle::random_matrix(rng, 8, 5);
  Vector w(8), adj(3);
  for (int i = 0; i < 8; ++i) w[i] = rng.uniform();
  adj << 0.7, 1.6, 0.9;
  const Vector analytic = loss_gradient(m, x, w, adj).flatten();
  const Vector numeric = oracle::fd_gradient(m, x, w, adj, 1e-5);
  CHECK(oracle::max_rel_error(analytic, numeric) <= 1e-4);
}

TEST_CASE("apply_update") {
  Parameters p;
  p.weights = {Matrix::Constant(1, 1, 1.0)};
  p.biases = {Vector::Zero(1)};
  MlpModel m({1, 1}, p);
  Parameters g = m.params().zeros_like();
  OptimizerState opt(1.0);
  CHECK(apply_update(m, g, opt));
  CHECK(m.params().weights[0](0, 0) == 1.0);

  g.weights[0](0, 0) = 0.25;
  CHECK(apply_update(m, g, opt));
  CHECK(m.params().weights[0](0, 0) == 0.75);

  g.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(apply_update(m, g, opt));
  CHECK(m.params().weights[0](0, 0) == 0.75);
}

TEST_CASE("momentum accumulates velocity") {
  Parameters p;
  p.weights = {Matrix::Zero(1, 1)};
  p.biases = {Vector::Zero(1)};
  MlpModel m({1, 1}, p);
  Parameters g = m.params().zeros_like();
  g.weights[0](0, 0) = 1.0;
  OptimizerState opt(0.5, UpdateRule::Momentum, 0.5);
  apply_update(m, g, opt);
  CHECK(m.params().weights[0](0, 0) == Approx(-0.5));
  apply_update(m, g, opt);
  CHECK(m.params().weights[0](0, 0) == Approx(-0.5 - 0.75));
}

TEST_CASE("update rule names") {
  CHECK(parse_update_rule("gd") == UpdateRule::GradientDescent);
  CHECK(parse_update_rule("sgd") == UpdateRule::GradientDescent);
  CHECK(parse_update_rule("momentum") == UpdateRule::Momentum);
  CHECK_THROWS_AS(parse_update_rule("adam"), InvalidInput);
  CHECK(to_string(UpdateRule::Momentum) == "momentum");
}

TEST_CASE("flatten and assign_flat round trip") {
  Philox rng(16, 0);
  MlpModel m = MlpModel::random({3, 4, 2}, rng);
  const Vector flat = m.params().flatten();
  CHECK(static_cast<std::size_t>(flat.size()) == m.params().size());
  MlpModel copy({3, 4, 2});
  copy.params().assign_flat(flat);
  CHECK(copy.params().flatten() == flat);
}

TEST_CASE("train_source on separable blobs") {
  ShiftSpec spec;
  spec.separation = 6.0;
  spec.source_size = 600;
  spec.seed = 5;
  const Dataset data = generate_source(spec);
  TrainConfig cfg;
  cfg.hidden = {16};
  cfg.epochs = 50;
  cfg.batch_size = 64;
  TrainReport report;
  const Checkpoint ck = train_source(data, cfg, &report);
  CHECK(report.final_train_accuracy >= 0.95);
  CHECK(report.best_epoch >= 0);
}

TEST_CASE("source prior is the exact training frequency") {
  TableSchema schema = synthetic_schema(2, 1);
  Dataset d{schema, Matrix(10, 1), {}};
  for (int i = 0; i < 10; ++i) {
    d.features(i, 0) = i < 7 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i;
    d.labels.push_back(i < 7 ? 0 : 1);
  }
  TrainConfig cfg;
  cfg.hidden = {4};
  cfg.epochs = 2;
  const Checkpoint ck = train_source(d, cfg);
  CHECK(ck.source_prior == ProbVector{0.7, 0.3});

  d.labels.assign(10, 1);
  CHECK_THROWS_AS(train_source(d, cfg), DataError);
}

TEST_CASE("checkpoint round trip reproduces forward outputs bitwise") {
  ShiftSpec spec;
  spec.source_size = 300;
  const Dataset data = generate_source(spec);
  TrainConfig cfg;
  cfg.hidden = {8, 8};
  cfg.epochs = 3;
  const Checkpoint ck = train_source(data, cfg);
  const auto path = std::filesystem::temp_directory_path() / "ftat_ckpt_roundtrip.json";
  ck.save(path);
  const Checkpoint back = Checkpoint::load(path);
  CHECK(back.model.logits(data.features) == ck.model.logits(data.features));
  CHECK(back.source_prior == ck.source_prior);
  CHECK(back.standardization.mean == ck.standardization.mean);
  CHECK(back.standardization.sd == ck.standardization.sd);
  CHECK(back.class_names() == ck.class_names());
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects a wrong format or version") {
  ShiftSpec spec;
  spec.source_size = 100;
  TrainConfig cfg;
  cfg.hidden = {4};
  cfg.epochs = 1;
  auto j = train_source(generate_source(spec), cfg).to_json();
  auto bad = j;
  bad["version"] = 99;
  CHECK_THROWS_AS(Checkpoint::from_json(bad), DataError);
  bad = j;
  bad["format"] = "something-else";
  CHECK_THROWS_AS(Checkpoint::from_json(bad), DataError);
  CHECK_THROWS_AS(Checkpoint::load("/nonexistent/ckpt.json"), DataError);
}
