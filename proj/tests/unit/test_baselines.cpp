#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "odsage/baselines.hpp"
#include "odsage/io.hpp"
#include "odsage/rng.hpp"

#include "../support/oracles.hpp"

using namespace odsage;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) m.at(i, j) = rows[i][j];
  return m;
}

}  // namespace

TEST_CASE("ridge exact fit with lambda zero") {
  const Matrix x = from_rows({{1}, {2}});
  const RidgeModel m = ridge_fit(x, {1, 2}, 0.0);
  CHECK(m.weights[0] == doctest::Approx(1.0));
  CHECK(m.intercept == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ridge uncentered no-intercept shrinkage") {
  // X'X = 5, X'y = 5, lambda 1 -> w = 5/6.
  const Matrix x = from_rows({{1}, {2}});
  RidgeOptions opts;
  opts.fit_intercept = false;
  const RidgeModel m = ridge_fit(x, {1, 2}, 1.0, opts);
  CHECK(m.weights[0] == doctest::Approx(5.0 / 6.0));
  CHECK(m.intercept == 0.0);
}

TEST_CASE("ridge weights vanish as lambda grows") {
  Rng rng(50);
  Matrix x(40, 3);
  std::vector<double> y(40);
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 3; ++j) x.at(i, j) = rng.uniform(-2, 2);
    y[i] = 3.0 * x.at(i, 0) - x.at(i, 2) + rng.uniform(-0.1, 0.1);
  }
  const RidgeModel small = ridge_fit(x, y, 1e-6);
  const RidgeModel huge = ridge_fit(x, y, 1e9);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::fabs(huge.weights[j]) < 1e-6);
    CHECK(std::fabs(huge.weights[j]) < std::fabs(small.weights[j]));
  }
}

TEST_CASE("ridge satisfies the normal equations and matches QR at lambda 0") {
  Rng rng(51);
  const int n = 60, f = 5;
  Matrix x(n, f);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < f; ++j) x.at(i, j) = rng.uniform(-1, 1);
    y[i] = rng.uniform(-3, 3);
  }

  RidgeOptions opts;
  opts.fit_intercept = false;
  for (double lambda : {0.0, 1e-3, 0.5}) {
    const RidgeModel m = ridge_fit(x, y, lambda, opts);
    // Residual of (X'X + lambda I) w = X'y, relative to the data scale.
    for (int i = 0; i < f; ++i) {
      double lhs = lambda * m.weights[i];
      double rhs = 0.0;
      for (int r = 0; r < n; ++r) {
        double xw = 0.0;
        for (int j = 0; j < f; ++j) xw += x.at(r, j) * m.weights[j];
        lhs += x.at(r, i) * xw;
        rhs += x.at(r, i) * y[r];
      }
      CHECK(std::fabs(lhs - rhs) < 1e-8 * std::max(1.0, std::fabs(rhs)));
    }
  }

  const RidgeModel ls = ridge_fit(x, y, 0.0, opts);
  const auto oracle = odsage::testing::least_squares_qr(x, y);
  for (int j = 0; j < f; ++j) CHECK(ls.weights[j] == doctest::Approx(oracle[j]).epsilon(1e-8));
}

TEST_CASE("singular system at lambda zero is rejected") {
  // Duplicate columns make X'X singular.
  const Matrix x = from_rows({{1, 1}, {2, 2}, {3, 3}});
  RidgeOptions opts;
  opts.fit_intercept = false;
  CHECK_THROWS_AS(ridge_fit(x, {1, 2, 3}, 0.0, opts), std::invalid_argument);
  // A positive lambda regularizes it.
  const RidgeModel m = ridge_fit(x, {1, 2, 3}, 1e-6, opts);
  CHECK(std::isfinite(m.weights[0]));
}

TEST_CASE("ridge accumulator equals in-memory fit") {
  Rng rng(52);
  Matrix x(30, 4);
  std::vector<double> y(30);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 4; ++j) x.at(i, j) = rng.uniform(-1, 1);
    y[i] = rng.uniform(0, 4);
  }
  RidgeAccumulator acc(4);
  for (int i = 0; i < 30; ++i) acc.add_row(x.row(i), y[i]);
  const RidgeModel streamed = acc.solve(1e-4);
  const RidgeModel direct = ridge_fit(x, y, 1e-4);
  for (int j = 0; j < 4; ++j)
    CHECK(streamed.weights[j] == doctest::Approx(direct.weights[j]).epsilon(1e-12));
  CHECK(streamed.intercept == doctest::Approx(direct.intercept).epsilon(1e-12));
}

TEST_CASE("ridge json round-trip") {
  RidgeModel m;
  m.weights = {0.25, -1.5, 3.0};
  m.intercept = 0.125;
  m.lambda = 1e-6;
  const auto path = (std::filesystem::temp_directory_path() / "odsage_ridge.json").string();
  save_ridge(m, path);
  const RidgeModel back = load_ridge(path);
  CHECK(back.weights == m.weights);
  CHECK(back.intercept == m.intercept);
  CHECK(back.lambda == m.lambda);
  std::filesystem::remove(path);
}

TEST_CASE("normalized adjacency: single vertex and one-edge pair") {
  OdGraph lone;
  lone.n = 1;
  const Csr a1 = normalized_adjacency(lone);
  REQUIRE(a1.val.size() == 1);
  CHECK(a1.val[0] == doctest::Approx(1.0));

  OdGraph pair;
  pair.n = 2;
  pair.edges = {{0, 1}};
  const Csr a2 = normalized_adjacency(pair);
  REQUIRE(a2.val.size() == 4);
  for (double v : a2.val) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("normalized adjacency is symmetric with spectral radius at most one") {
  Rng rng(53);
  OdGraph g;
  g.n = 12;
  for (int i = 0; i < g.n; ++i)
    for (int j = i + 1; j < g.n; ++j)
      if (rng.uniform() < 0.3) g.edges.push_back({i, j});
  const Csr a = normalized_adjacency(g);

  // Dense reconstruction for the symmetry check.
  Matrix dense(g.n, g.n);
  for (int i = 0; i < g.n; ++i)
    for (int p = a.ptr[i]; p < a.ptr[i + 1]; ++p) dense.at(i, a.idx[p]) = a.val[p];
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      CHECK(dense.at(i, j) == doctest::Approx(dense.at(j, i)));

  // Power iteration.
  std::vector<double> v(g.n, 1.0);
  double norm = std::sqrt(static_cast<double>(g.n));
  for (double& x : v) x /= norm;
  double radius = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<double> next(g.n, 0.0);
    for (int i = 0; i < g.n; ++i)
      for (int p = a.ptr[i]; p < a.ptr[i + 1]; ++p) next[i] += a.val[p] * v[a.idx[p]];
    norm = 0.0;
    for (double x : next) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : next) x /= norm;
    v = next;
    radius = norm;
  }
  CHECK(radius <= 1.0 + 1e-9);
}

TEST_CASE("gcn zero weights predict the head bias") {
  OdGraph g;
  g.n = 4;
  g.edges = {{0, 1}, {1, 2}, {2, 3}};
  SampleSet sample;
  sample.features = Matrix(4, 3);
  sample.targets.assign(4, 1.0);
  GcnConfig cfg;
  cfg.hidden = 4;
  cfg.epochs = 0;
  GcnModel m = gcn_train({sample}, g, cfg);
  m.w1.fill(0.0);
  m.w2.fill(0.0);
  std::fill(m.head_weight.begin(), m.head_weight.end(), 0.0);
  m.head_bias = 0.75;
  const Csr ahat = normalized_adjacency(g);
  for (double v : gcn_predict(m, sample, ahat)) CHECK(v == doctest::Approx(0.75));
}

TEST_CASE("gcn training reduces the loss") {
  Rng rng(54);
  OdGraph g;
  g.n = 10;
  for (int i = 0; i + 1 < g.n; ++i) g.edges.push_back({i, i + 1});
  std::vector<SampleSet> samples(4);
  for (auto& s : samples) {
    s.features = Matrix(10, 6);
    for (double& v : s.features.data) v = rng.uniform(-1, 1);
    s.targets.resize(10);
    for (double& t : s.targets) t = rng.uniform(0, 4);
  }
  GcnConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 200;
  cfg.learning_rate = 1e-2;
  std::vector<double> losses;
  gcn_train(samples, g, cfg, nullptr, &losses);
  REQUIRE(losses.size() == 200);
  CHECK(losses.back() < 0.5 * losses.front());
}

TEST_CASE("gcn raises its scalability error beyond the node limit") {
  OdGraph g;
  g.n = 5000;
  GcnConfig cfg;
  cfg.max_nodes = 2000;
  std::vector<SampleSet> samples(1);
  samples[0].features = Matrix(5000, 2);
  samples[0].targets.assign(5000, 0.0);
  CHECK_THROWS_AS(gcn_train(samples, g, cfg), ScalabilityError);
  try {
    gcn_train(samples, g, cfg);
  } catch (const ScalabilityError& e) {
    CHECK(std::string(e.what()).find("GCN not scalable at this size") != std::string::npos);
  }
}

TEST_CASE("gcn json round-trip") {
  OdGraph g;
  g.n = 3;
  g.edges = {{0, 1}};
  std::vector<SampleSet> samples(1);
  samples[0].features = Matrix(3, 2);
  samples[0].targets.assign(3, 1.0);
  GcnConfig cfg;
  cfg.hidden = 3;
  cfg.epochs = 2;
  cfg.learning_rate = 1e-3;
  const GcnModel m = gcn_train(samples, g, cfg);
  const auto path = (std::filesystem::temp_directory_path() / "odsage_gcn.json").string();
  save_gcn(m, path);
  const GcnModel back = load_gcn(path);
  CHECK(back.w1.data == m.w1.data);
  CHECK(back.w2.data == m.w2.data);
  CHECK(back.head_weight == m.head_weight);
  CHECK(back.head_bias == m.head_bias);
  std::filesystem::remove(path);
}

TEST_CASE("external predictions load and validate") {
  const auto path = (std::filesystem::temp_directory_path() / "odsage_ext.csv").string();
  write_text_file(path,
                  "day,slot,od_index,prediction\n"
                  "2021-02-01,3,0,1.5\n"
                  "2021-02-01,3,1,2.5\n"
                  "2021-02-02,4,0,0.5\n");
  const auto table = load_external_predictions(path, 2);
  REQUIRE(table.size() == 2);
  CHECK(table.at({0, 3})[0] == doctest::Approx(1.5));
  CHECK(table.at({0, 3})[1] == doctest::Approx(2.5));
  CHECK(table.at({1, 4})[0] == doctest::Approx(0.5));
  std::filesystem::remove(path);
}
