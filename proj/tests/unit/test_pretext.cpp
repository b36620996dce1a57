#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sscp/error.hpp"
#include "sscp/nn/loss.hpp"
#include "sscp/nn/train.hpp"
#include "sscp/pretext.hpp"
#include "sscp/random.hpp"

using namespace sscp;
using namespace sscp::pretext;

namespace {

RealMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  RealMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

nn::Mlp trained_predictor(const RealMatrix& x, std::uint64_t seed) {
  std::vector<double> y(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) y[i] = x(i, 0) - 0.5 * x(i, 1);
  auto config = nn::MlpConfig::dense(x.cols(), {16, 16}, 1);
  config.max_epochs = 20;
  config.patience = 5;
  config.seed = seed;
  return nn::train_supervised(nn::Mlp::init(config), x, RealMatrix::column_vector(y),
                              nn::Objective::uniform(nn::LossKind::mse()))
      .model;
}

PretextSettings fast(std::uint64_t seed, std::size_t epochs = 30) {
  PretextSettings s;
  s.seed = seed;
  s.max_epochs = epochs;
  s.patience = std::min<std::size_t>(10, epochs);
  return s;
}

}  // namespace

TEST_CASE("vime_corrupt with p = 0 is the identity") {
  Rng data_rng(1);
  const RealMatrix reps = random_matrix(20, 5, data_rng);
  Rng rng(2);
  const auto c = vime_corrupt(reps, 0.0, rng);
  CHECK(c.corrupted == reps);
  for (double m : c.mask.values()) CHECK(m == 0.0);
}

TEST_CASE("vime_corrupt mask rate is within three binomial sigma") {
  Rng data_rng(3);
  const RealMatrix reps = random_matrix(10000, 64, data_rng);
  Rng rng(4);
  const auto c = vime_corrupt(reps, 0.3, rng);
  double ones = 0.0;
  for (double m : c.mask.values()) ones += m;
  const double n = static_cast<double>(reps.size());
  CHECK(std::abs(ones / n - 0.3) < 3.0 * std::sqrt(0.3 * 0.7 / n));
  CHECK(std::abs(ones / n - 0.3) < 0.01);
}

TEST_CASE("vime_corrupt swaps values from other rows of the same column") {
  RealMatrix reps(6, 3);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 3; ++c) reps(r, c) = 10.0 * static_cast<double>(r) + static_cast<double>(c);
  }
  Rng rng(5);
  const auto out = vime_corrupt(reps, 0.5, rng);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = out.corrupted(r, c);
      if (out.mask(r, c) == 0.0) {
        CHECK(v == reps(r, c));
      } else {
        CHECK(v != reps(r, c));
        const double donor_row = std::round((v - static_cast<double>(c)) / 10.0);
        CHECK(v == reps(static_cast<std::size_t>(donor_row), c));
      }
    }
  }
}

TEST_CASE("vime_corrupt leaves constant columns unchanged") {
  Rng data_rng(6);
  RealMatrix reps = random_matrix(50, 4, data_rng);
  for (std::size_t r = 0; r < 50; ++r) reps(r, 2) = 7.25;
  Rng rng(7);
  const auto out = vime_corrupt(reps, 0.6, rng);
  for (std::size_t r = 0; r < 50; ++r) CHECK(out.corrupted(r, 2) == 7.25);
}

TEST_CASE("vime_corrupt needs two rows") {
  Rng rng(8);
  CHECK_THROWS_AS(vime_corrupt(RealMatrix(1, 4, 1.0), 0.3, rng), InsufficientDataError);
}

TEST_CASE("pretext encoder must be trained and stays frozen") {
  Rng rng(9);
  const RealMatrix x = random_matrix(200, 6, rng);
  const auto untrained = nn::Mlp::init(nn::MlpConfig::dense(6, {16, 16}, 1), 1);
  CHECK_THROWS_AS(FrozenEncoder::from_model(untrained), ContractViolation);

  const auto predictor = trained_predictor(x, 10);
  const auto before = predictor.layer_range(0, predictor.encoder_boundary());
  const auto encoder = FrozenEncoder::from_model(predictor);
  const auto model = SsModel::train(encoder, PretextKind::vime(), x, fast(11));
  REQUIRE(model.encoder().network());
  CHECK(*model.encoder().network() == before);
  CHECK(model.head().input_size() == 16);
  CHECK(model.head().output_size() == 32);
}

TEST_CASE("autoencoder reconstructs rank-one data") {
  Rng rng(12);
  RealMatrix x(400, 4);
  const std::vector<double> direction{1.0, -2.0, 0.5, 3.0};
  for (std::size_t r = 0; r < 400; ++r) {
    const double t = rng.uniform(-1.0, 1.0);
    for (std::size_t c = 0; c < 4; ++c) x(r, c) = t * direction[c];
  }
  PretextSettings s = fast(13, 400);
  s.patience = 50;
  s.learning_rate = 1e-2;
  s.batch_size = 32;
  s.hidden = {1};
  s.hidden_activations = {nn::Activation::kIdentity};
  const auto model = SsModel::train(FrozenEncoder::identity(4), PretextKind::autoencoder(), x, s);
  double mean_err = 0.0;
  for (double e : model.ss_errors(x)) mean_err += e;
  mean_err /= 400.0;
  double signal = 0.0;
  for (double v : x.values()) signal += v * v;
  signal /= static_cast<double>(x.size());
  CHECK(mean_err < 1e-3 * signal);
}

TEST_CASE("autoencoder head mirrors the encoder widths") {
  Rng rng(14);
  const RealMatrix x = random_matrix(100, 5, rng);
  const auto encoder = FrozenEncoder::from_model(trained_predictor(x, 15));
  const auto config = default_head_config(PretextKind::autoencoder(), encoder, fast(1));
  CHECK(config.layer_sizes == std::vector<std::size_t>{16, 16, 5});
}

TEST_CASE("VIME with no corruption learns the identity reconstruction") {
  Rng rng(16);
  const RealMatrix x = random_matrix(300, 3, rng);
  PretextSettings s = fast(17, 300);
  s.patience = 50;
  s.learning_rate = 1e-2;
  s.batch_size = 32;
  const auto model = SsModel::train(FrozenEncoder::identity(3), PretextKind::vime(0.0, 2.0), x, s);
  double feature = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) feature += model.vime_terms(x.row(i)).feature_mse;
  feature /= static_cast<double>(x.rows());
  CHECK(feature < 1e-2);
}

TEST_CASE("pretext training is deterministic") {
  Rng rng(18);
  const RealMatrix x = random_matrix(150, 4, rng);
  const auto a = SsModel::train(FrozenEncoder::identity(4), PretextKind::vime(), x, fast(19, 10));
  const auto b = SsModel::train(FrozenEncoder::identity(4), PretextKind::vime(), x, fast(19, 10));
  CHECK(a.head() == b.head());
  CHECK(a.ss_errors(x) == b.ss_errors(x));
  const auto c = SsModel::train(FrozenEncoder::identity(4), PretextKind::vime(), x, fast(20, 10));
  CHECK_FALSE(a.head() == c.head());
}

TEST_CASE("ss_error is pure, nonnegative and shape checked") {
  Rng rng(21);
  const RealMatrix x = random_matrix(200, 5, rng);
  const auto encoder = FrozenEncoder::from_model(trained_predictor(x, 22));
  for (const auto& kind : {PretextKind::vime(), PretextKind::autoencoder()}) {
    const auto model = SsModel::train(encoder, kind, x, fast(23, 10));
    const RealMatrix probe = random_matrix(300, 5, rng);
    for (std::size_t i = 0; i < probe.rows(); ++i) {
      const double e = model.ss_error(probe.row(i));
      CHECK(e >= 0.0);
      CHECK(std::isfinite(e));
      CHECK(model.ss_error(probe.row(i)) == e);
    }
    // Identical rows in different positions give identical errors.
    const RealMatrix twice = probe.select_rows(std::vector<std::size_t>{7, 3, 7});
    const auto errs = model.ss_errors(twice);
    CHECK(errs[0] == errs[2]);
    CHECK_THROWS_AS(model.ss_error(std::vector<double>(4, 0.0)), ShapeError);
  }
}

TEST_CASE("VIME loss decomposes into mask and feature terms") {
  Rng rng(24);
  const RealMatrix x = random_matrix(120, 4, rng);
  const auto model = SsModel::train(FrozenEncoder::identity(4), PretextKind::vime(0.3, 2.0), x, fast(25, 5));
  for (std::size_t i = 0; i < 20; ++i) {
    const auto terms = model.vime_terms(x.row(i));
    CHECK(terms.mask_bce >= 0.0);
    CHECK(terms.feature_mse >= 0.0);
    CHECK(model.ss_error(x.row(i)) == doctest::Approx(terms.mask_bce + 2.0 * terms.feature_mse).epsilon(1e-14));
  }
  // The same decomposition holds for the training objective on a fixed batch.
  const auto objective = nn::Objective::vime(4, 2.0);
  RealMatrix pred(3, 8);
  RealMatrix target(3, 8);
  for (double& v : pred.values()) v = rng.normal();
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) target(r, c) = rng.bernoulli(0.3) ? 1.0 : 0.0;
    for (std::size_t c = 4; c < 8; ++c) target(r, c) = rng.normal();
  }
  const auto per = objective.per_sample(pred, target);
  for (std::size_t r = 0; r < 3; ++r) {
    const auto p = pred.row(r);
    const auto t = target.row(r);
    const double mask = nn::loss_eval(nn::LossKind::mask_bce(), p.first(4), t.first(4));
    const double feat = nn::loss_eval(nn::LossKind::mse(), p.subspan(4), t.subspan(4));
    CHECK(per[r] == doctest::Approx(mask + 2.0 * feat).epsilon(1e-14));
  }
}

TEST_CASE("augment_features appends the error") {
  CHECK(augment_features(std::vector<double>{1.0, 2.0}, 0.5) == std::vector<double>{1.0, 2.0, 0.5});
  CHECK(augment_features(std::vector<double>{3.0}, 0.0) == std::vector<double>{3.0, 0.0});
  Rng rng(26);
  for (std::size_t d = 1; d < 10; ++d) {
    const auto x = random_matrix(1, d, rng);
    CHECK(augment_features(x.row(0), 1.0).size() == d + 1);
  }
  const RealMatrix m{{1.0, 2.0}, {3.0, 4.0}};
  const auto aug = augment_features(m, std::vector<double>{9.0, 8.0});
  CHECK(aug == RealMatrix{{1.0, 2.0, 9.0}, {3.0, 4.0, 8.0}});
  CHECK_THROWS_AS(augment_features(m, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("pretext kind validation") {
  CHECK_THROWS_AS(PretextKind::vime(1.0).validate(), ConfigError);
  CHECK_THROWS_AS(PretextKind::vime(0.3, 0.0).validate(), ConfigError);
  CHECK_NOTHROW(PretextKind::vime().validate());
  CHECK(PretextKind::vime().p_corrupt == 0.3);
  CHECK(PretextKind::vime().feature_loss_weight == 2.0);
}
