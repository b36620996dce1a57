#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <string>

#include "sscp/data.hpp"
#include "sscp/error.hpp"
#include "sscp/random.hpp"

using namespace sscp;
using namespace sscp::data;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / ("sscp_test_" + name);
  std::ofstream(path) << body;
  return path;
}

// Mean of |X| for X ~ N(mu, sd).
double folded_normal_mean(double mu, double sd) {
  const double z = mu / sd;
  return sd * std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * z * z) + mu * std::erf(z / std::sqrt(2.0));
}

}  // namespace

TEST_CASE("step function values") {
  CHECK(step(0.3) == 1.5);
  CHECK(step(0.5) == 0.1);
  CHECK(step(0.2) == 0.1);
  CHECK(step(0.4) == 0.1);
  CHECK(step(0.6) == 0.1);
  CHECK(step(0.7) == 1.5);
  CHECK(step(0.8) == 0.1);
  CHECK(step(0.0) == 0.1);
  CHECK(step(1.0) == 0.1);

  for (int i = 0; i <= 10000; ++i) {
    const double l = i / 10000.0;
    const bool in_a = 0.2 < l && l < 0.4;
    const bool in_b = 0.6 < l && l < 0.8;
    CHECK(step(l) == ((in_a || in_b) ? 1.5 : 0.1));
  }
}

TEST_CASE("synthetic samples lie on their circle") {
  const auto samples = synth_generate(2000, 11);
  REQUIRE(samples.size() == 2000);
  for (const auto& s : samples) {
    REQUIRE(s.features.size() == kSyntheticFeatures);
    CHECK(s.latent >= 0.0);
    CHECK(s.latent < 1.0);
    for (std::size_t j = 0; j < kSyntheticPairs; ++j) {
      const double x = s.features[2 * j];
      const double y = s.features[2 * j + 1];
      CHECK(std::abs(x * x + (y - s.latent) * (y - s.latent) - s.latent * s.latent) < 1e-12);
      CHECK(y >= -1e-15);
    }
  }
  CHECK_THROWS_AS(synth_generate(0, 1), InsufficientDataError);
}

TEST_CASE("synthetic zero-radius sample has zero features") {
  SyntheticSample s;
  s.latent = 0.0;
  for (std::size_t j = 0; j < kSyntheticPairs; ++j) {
    const double theta = 0.37 * static_cast<double>(j);
    s.features.push_back(s.latent * std::sin(theta));
    s.features.push_back(s.latent * (1.0 - std::cos(theta)));
  }
  const auto ds = to_dataset(std::span<const SyntheticSample>(&s, 1));
  for (double v : ds.x.values()) CHECK(v == 0.0);
  // Generated samples with small radius stay within the bounding box 2L.
  for (const auto& g : synth_generate(500, 3)) {
    for (double v : g.features) CHECK(std::abs(v) <= 2.0 * g.latent + 1e-15);
  }
}

TEST_CASE("synthetic residual magnitudes follow the step function") {
  const auto samples = synth_generate(100000, 2024);
  double sum_high = 0.0;
  double sum_low = 0.0;
  std::size_t n_high = 0;
  std::size_t n_low = 0;
  std::size_t positive = 0;
  for (const auto& s : samples) {
    if (s.residual > 0) ++positive;
    if (s.latent > 0.2 && s.latent < 0.4) {
      sum_high += std::abs(s.residual);
      ++n_high;
    } else if (s.latent > 0.4 && s.latent < 0.6) {
      sum_low += std::abs(s.residual);
      ++n_low;
    }
  }
  // |N(1.5, 0.1)| has mean 1.5 and sd 0.1; |N(0.1, 0.1)| has sd below 0.1.
  const double mean_high = sum_high / static_cast<double>(n_high);
  CHECK(std::abs(mean_high - folded_normal_mean(1.5, 0.1)) < 3.0 * 0.1 / std::sqrt(static_cast<double>(n_high)));
  const double mean_low = sum_low / static_cast<double>(n_low);
  CHECK(std::abs(mean_low - folded_normal_mean(0.1, 0.1)) < 3.0 * 0.1 / std::sqrt(static_cast<double>(n_low)));
  // Rademacher sign: binomial 3 sigma.
  CHECK(std::abs(static_cast<double>(positive) / 100000.0 - 0.5) < 3.0 * std::sqrt(0.25 / 100000.0));
}

TEST_CASE("synthetic generation is deterministic") {
  const auto a = synth_generate(50, 5);
  const auto b = synth_generate(50, 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].latent == b[i].latent);
    CHECK(a[i].residual == b[i].residual);
    CHECK(a[i].features == b[i].features);
  }
  CHECK(synth_generate(50, 6)[0].latent != a[0].latent);
}

TEST_CASE("split sizes for n = 1000") {
  const auto parts = split(1000, 1);
  CHECK(parts.test.size() == 200);
  CHECK(parts.res.size() == 160);
  CHECK(parts.cal.size() == 128);
  CHECK(parts.train.size() == 512);
  CHECK_NOTHROW(check_split(parts, 1000));
}

TEST_CASE("split is disjoint and exhaustive for random sizes") {
  Rng rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    const auto n = static_cast<std::size_t>(8 + rng.index(5000));
    const auto parts = split(n, rng.next_u64());
    std::set<std::size_t> seen;
    for (const auto* part : {&parts.train, &parts.res, &parts.cal, &parts.test}) {
      CHECK(std::is_sorted(part->begin(), part->end()));
      for (std::size_t i : *part) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == n);
    CHECK(*seen.rbegin() == n - 1);
    // Floor-then-remainder arithmetic.
    CHECK(parts.test.size() == n / 5);
    CHECK(parts.res.size() == (n - n / 5) / 5);
  }
}

TEST_CASE("split determinism and errors") {
  CHECK(split(300, 4).train == split(300, 4).train);
  CHECK(split(300, 4).test != split(300, 5).test);
  CHECK_THROWS_AS(split(4, 1), InsufficientDataError);

  SplitAssignment bad = split(100, 1);
  bad.cal.push_back(bad.train.front());
  CHECK_THROWS_AS(check_split(bad, 100), SplitIntegrityError);
  bad = split(100, 1);
  bad.train.pop_back();
  CHECK_THROWS_AS(check_split(bad, 100), SplitIntegrityError);
}

TEST_CASE("target rescaling by mean absolute value") {
  TabularDataset ds;
  ds.x = RealMatrix{{1.0}, {2.0}, {3.0}};
  ds.y = std::vector<double>{1.0, -2.0, 3.0};
  const auto s = Standardizer::fit(ds);
  CHECK(s.target_scale() == 2.0);
  const auto out = s.apply(ds);
  CHECK(*out.y == std::vector<double>{0.5, -1.0, 1.5});
}

TEST_CASE("constant feature column is flagged and zeroed") {
  TabularDataset ds;
  ds.x = RealMatrix{{1.0, 4.0}, {2.0, 4.0}, {3.0, 4.0}};
  const auto s = Standardizer::fit(ds);
  CHECK(s.any_degenerate());
  CHECK_FALSE(s.degenerate_columns()[0]);
  CHECK(s.degenerate_columns()[1]);
  CHECK(s.stds()[1] == 1.0);
  const auto z = s.apply_features(ds.x);
  for (std::size_t r = 0; r < 3; ++r) CHECK(z(r, 1) == 0.0);
}

TEST_CASE("standardization moments and round trip") {
  Rng rng(8);
  RealMatrix x(500, 6);
  for (std::size_t r = 0; r < 500; ++r) {
    for (std::size_t c = 0; c < 6; ++c) x(r, c) = 3.0 * static_cast<double>(c) + (1.0 + c) * rng.normal();
  }
  TabularDataset ds;
  ds.x = x;
  const auto s = Standardizer::fit(ds);
  const auto z = s.apply_features(x);
  for (std::size_t c = 0; c < 6; ++c) {
    double mean = 0.0;
    double sq = 0.0;
    for (std::size_t r = 0; r < 500; ++r) mean += z(r, c);
    mean /= 500.0;
    for (std::size_t r = 0; r < 500; ++r) sq += (z(r, c) - mean) * (z(r, c) - mean);
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(sq / 500.0 - 1.0) < 1e-10);
  }
  const auto back = s.invert_features(z);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back.values()[i] - x.values()[i]) < 1e-10);
  CHECK_THROWS_AS(Standardizer::fit(TabularDataset{}), EmptyInputError);
}

TEST_CASE("load_csv reads features and target") {
  const auto path = write_temp("ok.csv", "a,b,y\n1,2,3\n4,5,6\n7,8.5,-9e-1\n");
  const auto ds = load_csv(path, "y");
  CHECK(ds.x.rows() == 3);
  CHECK(ds.x.cols() == 2);
  REQUIRE(ds.y);
  CHECK(ds.y->size() == 3);
  CHECK((*ds.y)[2] == -0.9);
  CHECK(ds.x(2, 1) == 8.5);
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});

  const auto middle = load_csv(write_temp("mid.csv", "a,y,b\r\n1,2,3\r\n"), "y");
  CHECK(middle.x(0, 1) == 3.0);
  CHECK((*middle.y)[0] == 2.0);
}

TEST_CASE("load_csv reports errors with coordinates") {
  CHECK_THROWS_AS(load_csv(write_temp("missing.csv", "a,b\n1,2\n"), "y"), ParseError);
  try {
    load_csv(write_temp("nan.csv", "a,b,y\n1,2,3\n4,NaN,6\n"), "y");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("row 2") != std::string::npos);
    CHECK(what.find("'b'") != std::string::npos);
  }
  CHECK_THROWS_AS(load_csv(write_temp("ragged.csv", "a,b,y\n1,2,3\n4,5\n"), "y"), ParseError);
  CHECK_THROWS_AS(load_csv(write_temp("text.csv", "a,y\nfoo,1\n"), "y"), ParseError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", "y"), ParseError);
}

TEST_CASE("write_csv round trips through load_csv") {
  TabularDataset ds;
  ds.x = RealMatrix{{0.1, 1e-300}, {-2.5, 3.0}};
  ds.y = std::vector<double>{1.0 / 3.0, -7.0};
  ds.feature_names = {"p", "q"};
  ds.target_name = "t";
  const auto path = std::filesystem::temp_directory_path() / "sscp_test_roundtrip.csv";
  write_csv(path, ds);
  const auto back = load_csv(path, "t");
  CHECK(back.x == ds.x);
  CHECK(*back.y == *ds.y);
}

TEST_CASE("label_mask sizes and partition") {
  std::vector<std::size_t> train(1000);
  for (std::size_t i = 0; i < train.size(); ++i) train[i] = 3 * i;
  const auto full = label_mask(train, 1.0, 1);
  CHECK(full.labeled.size() == 1000);
  CHECK(full.unlabeled.empty());

  const auto tenth = label_mask(train, 0.1, 1);
  CHECK(tenth.labeled.size() == 100);
  CHECK(tenth.unlabeled.size() == 900);

  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const double p = 0.01 + 0.99 * rng.uniform();
    const auto part = label_mask(train, p, rng.next_u64());
    CHECK(part.labeled.size() == static_cast<std::size_t>(std::ceil(p * 1000.0 - 1e-9)));
    std::set<std::size_t> all(part.labeled.begin(), part.labeled.end());
    for (std::size_t i : part.unlabeled) CHECK(all.insert(i).second);
    CHECK(all == std::set<std::size_t>(train.begin(), train.end()));
  }
  CHECK_THROWS_AS(label_mask(train, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(label_mask(train, -0.5, 1), ConfigError);
  CHECK_THROWS_AS(label_mask(train, 1.5, 1), ConfigError);
}
