#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sscp/error.hpp"
#include "sscp/forest.hpp"
#include "sscp/random.hpp"

using namespace sscp;
using namespace sscp::forest;

namespace {

struct Problem {
  RealMatrix x;
  std::vector<double> y;
};

Problem make_problem(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Problem p{RealMatrix(n, d), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) p.x(i, j) = rng.uniform(-1.0, 1.0);
    p.y[i] = std::sin(3.0 * p.x(i, 0)) + (d > 1 ? p.x(i, 1) * p.x(i, 1) : 0.0) + 0.1 * rng.normal();
  }
  return p;
}

ForestConfig small(std::size_t trees, std::uint64_t seed) {
  ForestConfig c;
  c.n_trees = trees;
  c.seed = seed;
  c.n_threads = 1;
  return c;
}

}  // namespace

TEST_CASE("constant target gives constant predictions") {
  auto p = make_problem(80, 3, 1);
  std::fill(p.y.begin(), p.y.end(), 2.5);
  const auto f = Forest::fit(p.x, p.y, small(20, 2));
  const auto q = make_problem(50, 3, 3);
  for (double v : f.predict(q.x)) CHECK(v == 2.5);
}

TEST_CASE("a single deep tree memorises its bootstrap rows") {
  const auto p = make_problem(200, 4, 4);
  ForestConfig c = small(1, 5);
  c.min_samples_leaf = 1;
  c.max_features = 4;
  const auto f = Forest::fit(p.x, p.y, c);
  std::size_t in_bag = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    if (!f.in_bag(0, i)) continue;
    ++in_bag;
    // Leaves average duplicated bootstrap copies, so allow rounding.
    CHECK(f.predict(p.x.row(i)) == doctest::Approx(p.y[i]).epsilon(1e-12));
  }
  CHECK(in_bag > 100);
}

TEST_CASE("forest fitting is deterministic and thread independent") {
  const auto p = make_problem(150, 5, 6);
  const auto a = Forest::fit(p.x, p.y, small(40, 7));
  const auto b = Forest::fit(p.x, p.y, small(40, 7));
  CHECK(a == b);
  ForestConfig threaded = small(40, 7);
  threaded.n_threads = 3;
  CHECK(Forest::fit(p.x, p.y, threaded) == a);
  CHECK_FALSE(Forest::fit(p.x, p.y, small(40, 8)) == a);
}

TEST_CASE("forest prediction is the mean of tree predictions") {
  const auto p = make_problem(120, 3, 9);
  const auto f = Forest::fit(p.x, p.y, small(2, 10));
  const auto q = make_problem(30, 3, 11);
  for (std::size_t i = 0; i < q.x.rows(); ++i) {
    const double t0 = f.tree(0).predict(q.x.row(i));
    const double t1 = f.tree(1).predict(q.x.row(i));
    CHECK(f.predict(q.x.row(i)) == (t0 + t1) / 2.0);
  }
  const auto single = Forest::fit(p.x, p.y, small(1, 10));
  CHECK(single.predict(q.x.row(0)) == single.tree(0).predict(q.x.row(0)));
  CHECK_THROWS_AS(f.predict(std::vector<double>(2, 0.0)), ShapeError);
}

TEST_CASE("predictions stay within the training target range") {
  const auto p = make_problem(150, 4, 12);
  const auto f = Forest::fit(p.x, p.y, small(50, 13));
  const auto [lo, hi] = std::minmax_element(p.y.begin(), p.y.end());
  Rng rng(14);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(-3.0, 3.0);
    const double v = f.predict(x);
    CHECK(v >= *lo);
    CHECK(v <= *hi);
  }
}

TEST_CASE("out-of-bag exclusion rate matches bootstrap theory") {
  const std::size_t n = 300;
  const auto p = make_problem(n, 3, 15);
  ForestConfig c = small(1000, 16);
  c.max_depth = 1;
  const auto f = Forest::fit(p.x, p.y, c);
  const auto oob = f.oob_predict(p.x);
  double total = 0.0;
  for (std::size_t k : oob.n_oob_trees) total += static_cast<double>(k);
  const double trials = static_cast<double>(n) * 1000.0;
  const double q = std::pow(1.0 - 1.0 / static_cast<double>(n), static_cast<double>(n));
  // Per-tree exclusion counts are negatively correlated, so the binomial
  // sigma over all (tree, row) pairs is a conservative bound.
  CHECK(std::abs(total / trials - q) < 3.0 * std::sqrt(q * (1.0 - q) / trials));
  CHECK(std::abs(q - std::exp(-1.0)) < 1e-3);
  CHECK(oob.n_fallback() == 0);
}

TEST_CASE("with one tree, in-bag rows are flagged") {
  const std::size_t n = 2000;
  const auto p = make_problem(n, 2, 17);
  ForestConfig c = small(1, 18);
  c.max_depth = 2;
  const auto f = Forest::fit(p.x, p.y, c);
  const auto oob = f.oob_predict(p.x);
  const double q = 1.0 - std::pow(1.0 - 1.0 / static_cast<double>(n), static_cast<double>(n));
  const double rate = static_cast<double>(oob.n_fallback()) / static_cast<double>(n);
  CHECK(std::abs(rate - q) < 3.0 * std::sqrt(q * (1.0 - q) / static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(oob.fallback[i] == f.in_bag(0, i));
    if (oob.fallback[i]) CHECK(oob.values[i] == f.predict(p.x.row(i)));
  }
}

TEST_CASE("out-of-bag predictions differ from full-forest predictions") {
  const auto p = make_problem(100, 3, 19);
  const auto f = Forest::fit(p.x, p.y, small(30, 20));
  const auto oob = f.oob_predict(p.x);
  const auto full = f.predict(p.x);
  CHECK(oob.values != full);
  CHECK_THROWS_AS(f.oob_predict(make_problem(99, 3, 1).x), ShapeError);
}

TEST_CASE("constant features give single-leaf trees") {
  RealMatrix x(40, 3, 1.0);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = static_cast<double>(i);
  const auto f = Forest::fit(x, y, small(5, 21));
  for (std::size_t t = 0; t < 5; ++t) CHECK(f.tree(t).nodes().size() == 1);
}

TEST_CASE("a constant extra column does not change the forest") {
  const auto p = make_problem(120, 4, 22);
  const auto base = Forest::fit(p.x, p.y, small(25, 23));
  const auto widened = Forest::fit(p.x.append_column(std::vector<double>(120, 0.0)), p.y, small(25, 23));
  const auto q = make_problem(40, 4, 24);
  const auto wq = q.x.append_column(std::vector<double>(40, 0.0));
  CHECK(base.predict(q.x) == widened.predict(wq));
}

TEST_CASE("forest configuration errors") {
  const auto p = make_problem(50, 3, 25);
  ForestConfig c = small(0, 1);
  CHECK_THROWS_AS(Forest::fit(p.x, p.y, c), ConfigError);
  c = small(5, 1);
  c.max_features = 4;
  CHECK_THROWS_AS(Forest::fit(p.x, p.y, c), ConfigError);
  CHECK_THROWS_AS(Forest::fit(RealMatrix(1, 3), std::vector<double>{1.0}, small(5, 1)), InsufficientDataError);
  CHECK_THROWS_AS(Forest::fit(p.x, std::vector<double>(49, 0.0), small(5, 1)), ShapeError);
  CHECK(ForestConfig{}.resolved_max_features(20) == 7);
  CHECK(ForestConfig{}.resolved_max_features(3) == 1);
  CHECK(ForestConfig{}.n_trees == 1000);
}
