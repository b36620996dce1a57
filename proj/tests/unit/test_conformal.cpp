#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "sscp/conformal.hpp"
#include "sscp/data.hpp"
#include "sscp/error.hpp"
#include "sscp/pipeline.hpp"
#include "sscp/random.hpp"

using namespace sscp;
using namespace sscp::conformal;

namespace {

// k-th smallest by counting, with alpha given in percent so the rank is
// computed in exact integer arithmetic.
double brute_force_critical(const std::vector<double>& scores, int alpha_percent) {
  const long n = static_cast<long>(scores.size());
  const long k = ((n + 1) * (100 - alpha_percent) + 99) / 100;
  if (k > n) return kInfinity;
  double best = kInfinity;
  for (double candidate : scores) {
    long at_most = 0;
    for (double s : scores) at_most += s <= candidate ? 1 : 0;
    if (at_most >= k) best = std::min(best, candidate);
  }
  return best;
}

std::vector<double> random_scores(std::size_t n, Rng& rng, bool signed_values) {
  std::vector<double> s(n);
  const bool ties = rng.bernoulli(0.5);
  for (double& v : s) {
    v = ties ? static_cast<double>(rng.index(5)) : rng.uniform(0.0, 10.0);
    if (signed_values) v -= 5.0;
  }
  return s;
}

ConformalData synthetic_data(std::size_t n, std::uint64_t seed) {
  const auto samples = data::synth_generate(n, seed);
  const auto ds = data::to_dataset(samples);
  const auto parts = data::split(n, seed + 1);
  const auto train = ds.select_rows(parts.train);
  const auto scaler = data::Standardizer::fit(train);
  auto part = [&](const std::vector<std::size_t>& idx) { return scaler.apply(ds.select_rows(idx)); };
  const auto tr = part(parts.train);
  const auto res = part(parts.res);
  const auto cal = part(parts.cal);
  ConformalData d;
  d.x_train = tr.x;
  d.y_train = *tr.y;
  d.x_res = res.x;
  d.y_res = *res.y;
  d.x_cal = cal.x;
  d.y_cal = *cal.y;
  return d;
}

PipelineSettings fast_settings(std::uint64_t seed) {
  PipelineSettings s;
  s.seed = seed;
  s.network = nn::MlpConfig::dense(1, {16, 16}, 1);
  s.network.max_epochs = 15;
  s.network.patience = 5;
  s.pretext_settings.max_epochs = 10;
  s.pretext_settings.patience = 5;
  return s;
}

}  // namespace

TEST_CASE("quantile_index examples") {
  CHECK(quantile_index(99, 0.1) == 90);
  CHECK(quantile_index(10, 0.5) == 6);
  CHECK_FALSE(quantile_index(4, 0.1).has_value());
  CHECK(quantile_index(9, 0.1) == 9);
  CHECK_THROWS_AS(quantile_index(0, 0.1), EmptyInputError);
  CHECK_THROWS_AS(quantile_index(10, 0.0), ConfigError);
  CHECK_THROWS_AS(quantile_index(10, 1.0), ConfigError);
}

TEST_CASE("icp_calibrate examples") {
  const std::vector<double> ten{3, 1, 4, 10, 5, 9, 2, 6, 8, 7};
  CHECK(icp_calibrate(ten, 0.5) == 6.0);
  CHECK(icp_calibrate(std::vector<double>(7, 2.5), 0.2) == 2.5);
  CHECK(icp_calibrate(std::vector<double>{1, 2, 3, 4}, 0.1) == kInfinity);
  CHECK_THROWS_AS(icp_calibrate(std::vector<double>{}, 0.1), EmptyInputError);
  CHECK_THROWS_AS(icp_calibrate(std::vector<double>{1.0, -1.0}, 0.1), ContractViolation);
}

TEST_CASE("calibration matches brute-force enumeration") {
  Rng rng(42);
  for (int alpha_percent : {5, 10, 20}) {
    const double alpha = alpha_percent / 100.0;
    for (std::size_t n = 1; n <= 30; ++n) {
      for (int rep = 0; rep < 100; ++rep) {
        const auto scores = random_scores(n, rng, false);
        REQUIRE(icp_calibrate(scores, alpha) == brute_force_critical(scores, alpha_percent));

        std::vector<double> lo(n);
        std::vector<double> hi(n);
        std::vector<double> y(n);
        std::vector<double> cqr(n);
        for (std::size_t i = 0; i < n; ++i) {
          lo[i] = rng.uniform(-2.0, 1.0);
          hi[i] = lo[i] + rng.uniform(0.0, 3.0);
          y[i] = rng.bernoulli(0.2) ? lo[i] : rng.uniform(-4.0, 4.0);
          cqr[i] = std::max(lo[i] - y[i], y[i] - hi[i]);
        }
        REQUIRE(cqr_calibrate(lo, hi, y, alpha) == brute_force_critical(cqr, alpha_percent));
      }
    }
  }
}

TEST_CASE("larger alpha never increases epsilon") {
  Rng rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const auto scores = random_scores(1 + rng.index(60), rng, rng.bernoulli(0.5));
    double previous = kInfinity;
    for (double alpha = 0.01; alpha < 0.99; alpha += 0.01) {
      const double eps = critical_score(scores, alpha);
      CHECK(eps <= previous);
      previous = eps;
    }
  }
}

TEST_CASE("crf score and interval examples") {
  CHECK(crf_score(5.0, 3.0, 2.0) == 1.0);
  CHECK(crf_score(4.0, 4.0, 0.3) == 0.0);
  CHECK(crf_score(3.0, 1.0, 0.5) == 4.0);
  CHECK_THROWS_AS(crf_score(1.0, 0.0, 0.0), ContractViolation);
  CHECK_THROWS_AS(crf_score(1.0, 0.0, -1.0), ContractViolation);

  const auto a = crf_interval(1.0, 2.0, 0.5);
  CHECK(a.lower == 0.0);
  CHECK(a.upper == 2.0);
  const auto b = crf_interval(1.5, 0.0, 3.0);
  CHECK(b.lower == 1.5);
  CHECK(b.upper == 1.5);
  const auto c = crf_interval(-2.0, 0.75, 1.0);
  CHECK(c.lower == -2.75);
  CHECK(c.upper == -1.25);
  const auto inf = crf_interval(0.0, kInfinity, 1.0);
  CHECK(inf.lower == -kInfinity);
  CHECK(inf.upper == kInfinity);
}

TEST_CASE("ssl normalizer sigma") {
  CHECK(ssl_norm_sigma(0.0) == 1e-6);
  CHECK(ssl_norm_sigma(1.0, 1e-6) == 1.000001);
}

TEST_CASE("ssl normalizer coverage is invariant to doubling the errors") {
  Rng rng(3);
  const std::size_t n_cal = 500;
  const std::size_t n_test = 2000;
  auto draw = [&](std::size_t n, std::vector<double>& f, std::vector<double>& err, std::vector<double>& y) {
    f.resize(n);
    err.resize(n);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = rng.normal();
      err[i] = rng.uniform(0.1, 2.0);
      y[i] = f[i] + err[i] * rng.normal();
    }
  };
  std::vector<double> fc, ec, yc, ft, et, yt;
  draw(n_cal, fc, ec, yc);
  draw(n_test, ft, et, yt);
  auto covered = [&](double factor) {
    std::vector<double> scores(n_cal);
    for (std::size_t i = 0; i < n_cal; ++i) scores[i] = crf_score(yc[i], fc[i], ssl_norm_sigma(factor * ec[i]));
    const double eps = icp_calibrate(scores, 0.1);
    std::vector<bool> out(n_test);
    for (std::size_t i = 0; i < n_test; ++i) {
      out[i] = crf_interval(ft[i], eps, ssl_norm_sigma(factor * et[i])).contains(yt[i]);
    }
    return out;
  };
  CHECK(covered(1.0) == covered(2.0));
}

TEST_CASE("cqr score and interval examples") {
  CHECK(cqr_score(0.0, 2.0, 3.0) == 1.0);
  CHECK(cqr_score(0.0, 2.0, 1.0) == -1.0);
  CHECK(cqr_score(0.0, 2.0, -0.5) == 0.5);
  const auto iv = cqr_interval(0.0, 2.0, 0.5);
  CHECK(iv.lower == -0.5);
  CHECK(iv.upper == 2.5);
  const auto shrunk = cqr_interval(0.0, 2.0, -0.25);
  CHECK(shrunk.lower == 0.25);
  CHECK(shrunk.upper == 1.75);
  const auto collapsed = cqr_interval(0.0, 2.0, -3.0);
  CHECK(collapsed.lower == collapsed.upper);
}

TEST_CASE("cqr with every target inside by a margin gives a negative epsilon") {
  Rng rng(12);
  std::vector<double> lo(10), hi(10), y(10), margins(10);
  for (std::size_t i = 0; i < 10; ++i) {
    y[i] = rng.normal();
    margins[i] = 0.1 + 0.05 * static_cast<double>(i);
    lo[i] = y[i] - margins[i] - rng.uniform(0.0, 1.0);
    hi[i] = y[i] + margins[i];
  }
  // Scores are -margin_i; with n = 10 the ranks for alpha 0.1 and 0.2 are 10 and 9.
  CHECK(cqr_calibrate(lo, hi, y, 0.1) == doctest::Approx(-margins[0]).epsilon(1e-12));
  CHECK(cqr_calibrate(lo, hi, y, 0.2) == doctest::Approx(-margins[1]).epsilon(1e-12));
  CHECK(cqr_calibrate(lo, hi, y, 0.05) == kInfinity);
  std::fill(margins.begin(), margins.end(), 0.3);
  for (std::size_t i = 0; i < 10; ++i) {
    lo[i] = y[i] - 0.3;
    hi[i] = y[i] + 0.3;
  }
  CHECK(cqr_calibrate(lo, hi, y, 0.1) == doctest::Approx(-0.3).epsilon(1e-12));
}

TEST_CASE("normalizer floor and clamp") {
  CHECK(normalizer_floor(std::vector<double>{0.0, 0.0}) == 1e-6);
  CHECK(normalizer_floor(std::vector<double>{1.0, 3.0}) == 0.02);

  Rng rng(4);
  RealMatrix x(300, 3);
  for (double& v : x.values()) v = rng.normal();
  std::vector<double> targets(300);
  for (std::size_t i = 0; i < 300; ++i) targets[i] = std::abs(x(i, 0)) * (i % 7 == 0 ? 0.0 : 1.0);
  NormalizerSettings s;
  s.mlp = nn::MlpConfig::dense(3, {8}, 1);
  s.mlp.max_epochs = 5;
  s.mlp.patience = 2;
  const auto sigma = train_normalizer(x, targets, s);
  RealMatrix probe(10000, 3);
  for (double& v : probe.values()) v = 5.0 * rng.normal();
  for (double v : sigma.predict(probe)) CHECK(v >= sigma.floor());

  std::vector<double> negative = targets;
  negative[3] = -0.1;
  CHECK_THROWS_AS(train_normalizer(x, negative, s), ContractViolation);
}

TEST_CASE("normalizer on constant residuals predicts the constant") {
  Rng rng(5);
  RealMatrix x(400, 2);
  for (double& v : x.values()) v = rng.normal();
  const std::vector<double> targets(400, 0.7);
  NormalizerSettings s;
  s.backend = NormalizerBackend::kForest;
  s.forest.n_trees = 20;
  const auto forest_sigma = train_normalizer(x, targets, s);
  for (double v : forest_sigma.predict(x)) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));

  s.backend = NormalizerBackend::kMlp;
  s.mlp = nn::MlpConfig::dense(2, {16}, 1);
  s.mlp.dropout_rate = 0.0;
  s.mlp.learning_rate = 1e-2;
  s.mlp.max_epochs = 300;
  s.mlp.patience = 300;
  const auto mlp_sigma = train_normalizer(x, targets, s);
  for (double v : mlp_sigma.predict(x)) CHECK(std::abs(v - 0.7) < 0.05);
}

TEST_CASE("an oracle SS column lowers held-out sigma error") {
  const auto samples = data::synth_generate(1500, 77);
  const auto ds = data::to_dataset(samples);
  std::vector<double> abs_r(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) abs_r[i] = std::abs(samples[i].residual);
  const RealMatrix with_ss = ds.x.append_column(abs_r);
  std::vector<std::size_t> fit_rows(1000);
  std::vector<std::size_t> held_rows(500);
  for (std::size_t i = 0; i < 1000; ++i) fit_rows[i] = i;
  for (std::size_t i = 0; i < 500; ++i) held_rows[i] = 1000 + i;
  const auto fit_y = select(abs_r, fit_rows);
  const auto held_y = select(abs_r, held_rows);
  auto mae = [&](const Normalizer& n, const RealMatrix& x) {
    const auto pred = n.predict(x);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - held_y[i]);
    return s / static_cast<double>(pred.size());
  };
  for (auto backend : {NormalizerBackend::kForest, NormalizerBackend::kMlp}) {
    NormalizerSettings s;
    s.backend = backend;
    s.forest.n_trees = 100;
    s.mlp = nn::MlpConfig::regressor(20);
    s.mlp.max_epochs = 60;
    const double plain = mae(train_normalizer(ds.x.select_rows(fit_rows), fit_y, s), ds.x.select_rows(held_rows));
    s.use_ss = true;
    const double oracle = mae(train_normalizer(with_ss.select_rows(fit_rows), fit_y, s), with_ss.select_rows(held_rows));
    CHECK(oracle < plain);
  }
}

TEST_CASE("a zero SS column reproduces the plain MLP normalizer") {
  Rng rng(6);
  RealMatrix x(200, 4);
  for (double& v : x.values()) v = rng.normal();
  std::vector<double> t(200);
  for (std::size_t i = 0; i < 200; ++i) t[i] = std::abs(x(i, 1));
  NormalizerSettings s;
  s.mlp = nn::MlpConfig::dense(4, {8, 8}, 1);
  s.mlp.max_epochs = 10;
  s.mlp.patience = 5;
  const auto plain = train_normalizer(x, t, s);
  s.use_ss = true;
  s.extra_input_seed = 99;
  const RealMatrix zero = x.append_column(std::vector<double>(200, 0.0));
  const auto widened = train_normalizer(zero, t, s);
  CHECK(plain.predict(x) == widened.predict(zero));
}

TEST_CASE("scaled normalizer multiplies outputs") {
  const auto c = Normalizer::constant(2.0);
  const RealMatrix x(3, 1, 0.0);
  CHECK(c.scaled(10.0).predict(x) == std::vector<double>(3, 20.0));
  CHECK_THROWS_AS(c.scaled(0.0), ContractViolation);
}

TEST_CASE("pipelines: identities and invariants") {
  const auto data = synthetic_data(900, 11);
  const auto settings = fast_settings(5);
  const auto test = synthetic_data(900, 12);
  auto f = std::make_shared<const nn::Mlp>(train_predictor(data, settings));

  SUBCASE("ICP widths are constant") {
    const auto icp = icp_fit(f, data, settings);
    const auto pred = icp.predict(test.x_cal);
    for (const auto& iv : pred.intervals) CHECK(iv.width() == pred.intervals.front().width());
  }

  SUBCASE("sigma fixed at 1 reproduces ICP") {
    const auto icp = icp_fit(f, data, settings);
    CalibratedConformal unit;
    unit.kind = Kind::kCrf;
    unit.alpha = settings.alpha;
    unit.model = f;
    unit.sigma = Normalizer::constant(1.0);
    unit = calibrate_with(unit, data.x_cal, data.y_cal);
    CHECK(unit.epsilon == icp.epsilon);
    CHECK(unit.predict(test.x_cal).intervals == icp.predict(test.x_cal).intervals);
  }

  SUBCASE("zeroed SS feature reproduces CRF") {
    auto ss = std::make_shared<const pretext::SsModel>(train_pretext_on(*f, data.x_train, settings));
    auto zero = settings;
    zero.zero_ss_feature = true;
    const auto crf = crf_fit(f, data, settings);
    const auto sscp = sscp_fit(f, ss, data, zero);
    CHECK(sscp.epsilon == crf.epsilon);
    CHECK(sscp.predict(test.x_cal).intervals == crf.predict(test.x_cal).intervals);
    // With the real errors the model differs.
    const auto real = sscp_fit(f, ss, data, settings);
    CHECK(real.predict(test.x_cal).sigma != crf.predict(test.x_cal).sigma);
  }

  SUBCASE("zeroed SS feature reproduces CQR (independent encoder)") {
    auto zero = settings;
    zero.zero_ss_feature = true;
    const auto cqr = cqr_fit(data, settings);
    const auto indep = cqr_sscp_fit(data, zero, EncoderMode::kIndependent);
    CHECK(indep.epsilon == cqr.epsilon);
    CHECK(indep.predict(test.x_cal).intervals == cqr.predict(test.x_cal).intervals);
    CHECK(cqr.crossing_rate >= 0.0);
    CHECK(cqr.crossing_rate <= 1.0);
  }

  SUBCASE("shared-encoder CQR trains and calibrates") {
    const auto shared = cqr_sscp_fit(data, settings, EncoderMode::kShared);
    CHECK(shared.ss_placeholder);
    CHECK(std::isfinite(shared.epsilon));
    const auto pred = shared.predict(test.x_cal);
    for (std::size_t i = 0; i < pred.intervals.size(); ++i) {
      CHECK(pred.intervals[i].lower <= pred.intervals[i].upper);
      CHECK(pred.ss_error[i] >= 0.0);
    }
  }

  SUBCASE("scaling sigma leaves intervals unchanged") {
    auto ss = std::make_shared<const pretext::SsModel>(train_pretext_on(*f, data.x_train, settings));
    for (const auto& base : {crf_fit(f, data, settings), sscp_fit(f, ss, data, settings),
                             ssl_norm_fit(f, ss, data, settings), icp_fit(f, data, settings)}) {
      const auto ref = base.predict(test.x_cal).intervals;
      for (double c : {0.1, 1.0, 10.0}) {
        const auto scaled = base.with_scaled_sigma(c, data.x_cal, data.y_cal);
        const auto got = scaled.predict(test.x_cal).intervals;
        for (std::size_t i = 0; i < ref.size(); ++i) {
          CHECK(std::abs(got[i].lower - ref[i].lower) <= 1e-9);
          CHECK(std::abs(got[i].upper - ref[i].upper) <= 1e-9);
        }
      }
    }
  }

  SUBCASE("calibration-time SS errors equal test-time errors") {
    auto ss = std::make_shared<const pretext::SsModel>(train_pretext_on(*f, data.x_train, settings));
    const auto sscp = sscp_fit(f, ss, data, settings);
    CHECK(sscp.ss_errors(data.x_cal) == ss->ss_errors(data.x_cal));
    CHECK(sscp.predict(data.x_cal).ss_error == ss->ss_errors(data.x_cal));
  }
}

TEST_CASE("kind names round trip") {
  for (auto k : {Kind::kIcp, Kind::kCrf, Kind::kSscp, Kind::kSslNorm, Kind::kCqr, Kind::kCqrSscp}) {
    CHECK(kind_from_string(to_string(k)) == k);
  }
  CHECK_FALSE(kind_from_string("nope").has_value());
}
