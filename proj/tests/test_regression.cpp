#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "acoustiprobe/error.hpp"
#include "acoustiprobe/regression.hpp"
#include "svr_audit.hpp"

using namespace acoustiprobe;

namespace {

struct Problem {
  Matrix x;
  std::vector<double> y;
};

Problem random_problem(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Problem p{Matrix(n, d), std::vector<double>(n)};
  for (double& v : p.x.data) v = g(rng);
  for (std::size_t i = 0; i < n; ++i) {
    p.y[i] = 3.0 * std::sin(p.x.at(i, 0)) + p.x.at(i, d - 1) + 0.3 * g(rng) + 10.0;
  }
  return p;
}

double mae(const Model& model, const Matrix& x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) s += std::abs(predict(model, x.row(i)) - y[i]);
  return s / double(x.rows);
}

Problem permuted(const Problem& p, std::uint64_t seed) {
  std::vector<std::size_t> order(p.x.rows);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(seed));
  Problem q{Matrix(p.x.rows, p.x.cols), std::vector<double>(p.x.rows)};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = p.x.row(order[i]);
    std::copy(src.begin(), src.end(), q.x.row(i).begin());
    q.y[i] = p.y[order[i]];
  }
  return q;
}

}  // namespace

TEST_CASE("scaler standardises columns and leaves constant columns unscaled") {
  const Matrix x = Matrix::from_rows({{1, 5}, {3, 5}, {5, 5}});
  const Scaler s = Scaler::fit(x);
  CHECK(s.means[0] == 3.0);
  CHECK(s.stds[1] == 1.0);
  const Matrix z = s.transform(x);
  CHECK(z.at(0, 0) == doctest::Approx(-z.at(2, 0)));
  CHECK(z.at(1, 1) == 0.0);
  double ss = 0.0;
  for (std::size_t i = 0; i < 3; ++i) ss += z.at(i, 0) * z.at(i, 0);
  CHECK(ss / 3.0 == doctest::Approx(1.0));
}

TEST_CASE("svr on a constant target predicts the constant") {
  Problem p = random_problem(1, 30, 4);
  std::fill(p.y.begin(), p.y.end(), 42.5);
  const SvrModel m = train_svr(p.x, p.y);
  CHECK(m.converged);
  for (std::size_t i = 0; i < 30; ++i) CHECK(m.predict(p.x.row(i)) == doctest::Approx(42.5));
  CHECK(m.dual_coeffs.empty());
}

TEST_CASE("svr fits a noisy line and generalises") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  auto sample = [&](std::size_t n, Matrix& x, std::vector<double>& y) {
    x = Matrix(n, 1);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      x.data[i] = u(rng);
      y[i] = 3.0 * x.data[i] + noise(rng);
    }
  };
  Matrix x, xt;
  std::vector<double> y, yt;
  sample(50, x, y);
  sample(50, xt, yt);
  for (KernelKind kernel : {KernelKind::Rbf, KernelKind::Linear}) {
    SvrParams params;
    params.kernel = kernel;
    const Model m = train_svr(x, y, params);
    CHECK(mae(m, xt, yt) <= 0.15);
  }
}

TEST_CASE("svr solutions satisfy the KKT conditions and dual feasibility") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Problem p = random_problem(100 + seed, 20 + 5 * seed, 3);
    SvrParams params;
    params.c = seed % 2 == 0 ? 10.0 : 0.5;
    params.kernel = seed % 3 == 0 ? KernelKind::Linear : KernelKind::Rbf;
    const SvrModel m = train_svr(p.x, p.y, params);
    CHECK(m.converged);
    CHECK(m.final_violation < 1e-3);
    const oracle::KktReport rep = oracle::kkt_audit(m, p.x, p.y);
    CHECK(rep.matched);
    CHECK(rep.worst <= 1e-3);
    CHECK(rep.max_abs_coef <= params.c * (1 + 1e-12));
    CHECK(std::abs(rep.coef_sum) < 1e-9);
  }
}

TEST_CASE("svr gamma defaults to one over the dimension") {
  const Problem p = random_problem(4, 12, 5);
  CHECK(train_svr(p.x, p.y).params.gamma == doctest::Approx(0.2));
  SvrParams params;
  params.gamma = 0.7;
  CHECK(train_svr(p.x, p.y, params).params.gamma == 0.7);
}

TEST_CASE("iteration cap is reported as non-convergence") {
  const Problem p = random_problem(5, 40, 3);
  SvrParams params;
  params.max_iterations = 2;
  const SvrModel m = train_svr(p.x, p.y, params);
  CHECK_FALSE(m.converged);
  CHECK(m.iterations == 2);
  CHECK(m.final_violation >= 1e-3);
}

TEST_CASE("regressors are invariant to training row order") {
  const Problem p = random_problem(6, 40, 3);
  const Problem q = permuted(p, 99);
  GbrParams gp;
  gp.n_trees = 40;
  const SvrModel sa = train_svr(p.x, p.y), sb = train_svr(q.x, q.y);
  const GbrModel ga = train_gbr(p.x, p.y, gp), gb = train_gbr(q.x, q.y, gp);
  for (std::size_t i = 0; i < p.x.rows; ++i) {
    CHECK(sa.predict(p.x.row(i)) == sb.predict(p.x.row(i)));
    CHECK(ga.predict(p.x.row(i)) == gb.predict(p.x.row(i)));
  }
}

TEST_CASE("training is deterministic") {
  const Problem p = random_problem(7, 30, 2);
  GbrParams gp;
  gp.subsample = 0.7;
  gp.seed = 3;
  const GbrModel a = train_gbr(p.x, p.y, gp), b = train_gbr(p.x, p.y, gp);
  CHECK(a.train_mse == b.train_mse);
  gp.seed = 4;
  CHECK(train_gbr(p.x, p.y, gp).train_mse != a.train_mse);
}

TEST_CASE("gbr training loss never increases") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Problem p = random_problem(200 + seed, 60, 4);
    GbrParams gp;
    gp.n_trees = 100;
    gp.min_samples_leaf = 1 + seed;
    const GbrModel m = train_gbr(p.x, p.y, gp);
    REQUIRE(m.train_mse.size() == 101);
    for (std::size_t k = 1; k < m.train_mse.size(); ++k) {
      CHECK(m.train_mse[k] <= m.train_mse[k - 1] + 1e-12 * m.train_mse[0]);
    }
    CHECK(m.train_mse.back() < 0.5 * m.train_mse.front());
  }
}

TEST_CASE("boosted stumps learn a step function") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(200, 1);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    x.data[i] = u(rng);
    y[i] = x.data[i] > 0.5 ? 1.0 : 0.0;
  }
  GbrParams gp;
  gp.n_trees = 100;
  gp.max_depth = 1;
  const GbrModel m = train_gbr(x, y, gp);
  CHECK(mae(m, x, y) <= 0.05);

  // The first stump splits midway between the two points straddling 0.5.
  double below = 0.0, above = 1.0;
  for (double v : x.data) {
    if (v <= 0.5) below = std::max(below, v); else above = std::min(above, v);
  }
  const auto& root = m.trees.front().nodes.front();
  REQUIRE_FALSE(root.is_leaf());
  const double zb = (below - m.scaler.means[0]) / m.scaler.stds[0];
  const double za = (above - m.scaler.means[0]) / m.scaler.stds[0];
  CHECK(root.threshold == doctest::Approx((zb + za) / 2));
}

TEST_CASE("gbr tree shape limits") {
  const Problem p = random_problem(8, 80, 3);
  GbrParams gp;
  gp.n_trees = 10;
  gp.max_depth = 2;
  gp.min_samples_leaf = 7;
  const GbrModel m = train_gbr(p.x, p.y, gp);
  const Matrix z = m.scaler.transform(p.x);
  for (const RegressionTree& t : m.trees) {
    CHECK(t.depth() <= 2);
    std::vector<std::size_t> counts(t.nodes.size(), 0);
    for (std::size_t i = 0; i < z.rows; ++i) ++counts[t.leaf_index(z.row(i))];
    for (std::size_t n = 0; n < t.nodes.size(); ++n) {
      if (t.nodes[n].is_leaf()) CHECK(counts[n] >= 7);
    }
  }
}

TEST_CASE("gbr with leaf size one and a large rate interpolates distinct points") {
  const Problem p = random_problem(9, 12, 1);
  GbrParams gp;
  gp.n_trees = 200;
  gp.learning_rate = 1.0;
  gp.max_depth = 4;
  gp.min_samples_leaf = 1;
  const GbrModel m = train_gbr(p.x, p.y, gp);
  for (std::size_t i = 0; i < 12; ++i) CHECK(m.predict(p.x.row(i)) == doctest::Approx(p.y[i]).epsilon(1e-6));
}

TEST_CASE("degenerate models") {
  const Problem p = random_problem(10, 10, 2);
  GbrParams gp;
  gp.n_trees = 0;
  const GbrModel g = train_gbr(p.x, p.y, gp);
  const double mean = std::accumulate(p.y.begin(), p.y.end(), 0.0) / 10.0;
  CHECK(g.predict(p.x.row(3)) == doctest::Approx(mean));
  CHECK(g.train_mse.size() == 1);

  Matrix one(1, 2);
  one.data = {0.5, -0.5};
  const std::vector<double> y1 = {7.0};
  const GbrModel single = train_gbr(one, y1);
  CHECK(single.predict(one.row(0)) == 7.0);
  CHECK_THROWS_AS(train_svr(one, y1), Error);
}

TEST_CASE("input validation") {
  const Problem p = random_problem(11, 10, 2);
  std::vector<double> short_y(p.y.begin(), p.y.begin() + 5);
  CHECK_THROWS_AS(train_svr(p.x, short_y), Error);
  Problem bad = p;
  bad.y[2] = std::nan("");
  CHECK_THROWS_AS(train_gbr(bad.x, bad.y), Error);
  const Model m = train_gbr(p.x, p.y);
  CHECK(input_dim(m) == 2);
  try {
    predict(m, std::vector<double>{1.0, 2.0, 3.0});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidInput);
  }
  SvrParams sp;
  sp.c = 0.0;
  CHECK_THROWS_AS(train_svr(p.x, p.y, sp), Error);
  CHECK(parse_regressor_kind("gbr") == RegressorKind::Gbr);
  CHECK(parse_kernel_kind("linear") == KernelKind::Linear);
  CHECK_FALSE(parse_regressor_kind("rf"));
}
