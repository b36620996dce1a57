#include "sscp/pretext.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <string>

#include "sscp/error.hpp"
#include "sscp/nn/loss.hpp"
#include "sscp/nn/train.hpp"

namespace sscp::pretext {

namespace {

constexpr std::uint64_t kTrainCorruptionStream = 0xc0;
constexpr std::uint64_t kDonorStream = 0xd0;
constexpr std::uint64_t kTestCorruptionStream = 0xc1;

std::uint64_t row_hash(std::span<const double> x) {
  return hash_bytes(std::as_bytes(x));
}

}  // namespace

void PretextKind::validate() const {
  if (type == Type::kVime) {
    if (!(p_corrupt >= 0.0 && p_corrupt < 1.0)) {
      throw ConfigError("VIME corruption probability must lie in [0, 1), got " + std::to_string(p_corrupt));
    }
    if (!(feature_loss_weight > 0.0)) throw ConfigError("VIME feature loss weight must be positive");
  }
}

Corruption vime_corrupt(const RealMatrix& reps, double p_corrupt, Rng& rng) {
  const std::size_t n = reps.rows();
  if (n < 2) throw InsufficientDataError("VIME corruption needs at least two rows, got " + std::to_string(n));
  Corruption out{reps, RealMatrix(n, reps.cols(), 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < reps.cols(); ++j) {
      if (!rng.bernoulli(p_corrupt)) continue;
      auto donor = static_cast<std::size_t>(rng.index(n - 1));
      if (donor >= i) ++donor;
      out.corrupted(i, j) = reps(donor, j);
      out.mask(i, j) = 1.0;
    }
  }
  return out;
}

void vime_corrupt_row(std::span<const double> row, const RealMatrix& donors, double p_corrupt, Rng& rng,
                      std::span<double> corrupted, std::span<double> mask) {
  if (donors.rows() == 0) throw InsufficientDataError("empty donor pool");
  if (donors.cols() != row.size() || corrupted.size() != row.size() || mask.size() != row.size()) {
    throw ShapeError("corruption row and donor pool widths differ");
  }
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (rng.bernoulli(p_corrupt)) {
      corrupted[j] = donors(static_cast<std::size_t>(rng.index(donors.rows())), j);
      mask[j] = 1.0;
    } else {
      corrupted[j] = row[j];
      mask[j] = 0.0;
    }
  }
}

FrozenEncoder FrozenEncoder::identity(std::size_t dim) {
  if (dim == 0) throw ConfigError("identity encoder needs a positive width");
  FrozenEncoder e;
  e.input_size_ = dim;
  return e;
}

FrozenEncoder FrozenEncoder::from_model(const nn::Mlp& model) {
  if (!model.trained()) throw ContractViolation("the pretext encoder must come from a trained model");
  FrozenEncoder e;
  e.input_size_ = model.input_size();
  e.network_ = model.layer_range(0, model.encoder_boundary());
  return e;
}

RealMatrix FrozenEncoder::encode(const RealMatrix& x) const {
  if (x.cols() != input_size_) {
    throw ShapeError("encoder expects " + std::to_string(input_size_) + " features, got " + std::to_string(x.cols()));
  }
  return network_ ? network_->predict(x) : x;
}

std::size_t FrozenEncoder::output_size() const noexcept {
  return network_ ? network_->output_size() : input_size_;
}

std::vector<std::size_t> FrozenEncoder::widths() const {
  if (!network_) return {input_size_};
  return network_->config().layer_sizes;
}

nn::MlpConfig default_head_config(const PretextKind& kind, const FrozenEncoder& encoder,
                                  const PretextSettings& settings) {
  const std::size_t rep = encoder.output_size();
  std::vector<std::size_t> hidden = settings.hidden;
  std::size_t n_out = 0;
  if (kind.is_vime()) {
    if (hidden.empty()) hidden = {rep};
    n_out = 2 * rep;
  } else {
    if (hidden.empty()) {
      // Encoder widths reversed, minus the representation itself and the
      // input width (which becomes the output).
      const auto w = encoder.widths();
      hidden.assign(w.rbegin() + 1, w.rend() - 1);
      if (hidden.empty()) hidden = {rep};
    }
    n_out = encoder.input_size();
  }
  nn::MlpConfig config = nn::MlpConfig::dense(rep, hidden, n_out);
  config.hidden_activations = settings.hidden_activations;
  config.encoder_boundary = settings.head_encoder_boundary;
  config.dropout_rate = settings.dropout_rate;
  config.learning_rate = settings.learning_rate;
  config.batch_size = settings.batch_size;
  config.max_epochs = settings.max_epochs;
  config.patience = settings.patience;
  config.seed = settings.seed;
  return config;
}

SsModel::SsModel(FrozenEncoder encoder, nn::Mlp head, PretextKind kind, RealMatrix donors, std::uint64_t seed,
                 std::size_t epochs_run)
    : encoder_(std::move(encoder)),
      head_(std::move(head)),
      kind_(kind),
      donors_(std::move(donors)),
      corruption_seed_(seed),
      epochs_run_(epochs_run) {}

SsModel SsModel::train(const FrozenEncoder& encoder, const PretextKind& kind, const RealMatrix& data,
                       const PretextSettings& settings) {
  kind.validate();
  if (data.rows() < 2) throw InsufficientDataError("pretext training needs at least two rows");
  const RealMatrix reps = encoder.encode(data);
  const nn::MlpConfig config = default_head_config(kind, encoder, settings);
  const nn::Mlp initial = nn::Mlp::init(config);

  RealMatrix inputs;
  RealMatrix targets;
  nn::Objective objective = nn::Objective::uniform(nn::LossKind::mse(), config.layer_sizes.back());
  if (kind.is_vime()) {
    Rng rng(derive_seed(settings.seed, {kTrainCorruptionStream}));
    Corruption c = vime_corrupt(reps, kind.p_corrupt, rng);
    inputs = std::move(c.corrupted);
    targets = RealMatrix(reps.rows(), 2 * reps.cols());
    for (std::size_t i = 0; i < reps.rows(); ++i) {
      auto t = targets.row(i);
      std::copy(c.mask.row(i).begin(), c.mask.row(i).end(), t.begin());
      std::copy(reps.row(i).begin(), reps.row(i).end(), t.begin() + static_cast<std::ptrdiff_t>(reps.cols()));
    }
    objective = nn::Objective::vime(reps.cols(), kind.feature_loss_weight);
  } else {
    inputs = reps;
    targets = data;
  }
  auto result = nn::train_supervised(initial, inputs, targets, objective);

  // Reference rows for test-time swaps.
  std::vector<std::size_t> order(reps.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng donor_rng(derive_seed(settings.seed, {kDonorStream}));
  donor_rng.shuffle(std::span<std::size_t>(order));
  order.resize(std::min(order.size(), std::max<std::size_t>(settings.donor_pool_size, 1)));
  std::sort(order.begin(), order.end());

  return SsModel(encoder, std::move(result.model), kind, reps.select_rows(order),
                 derive_seed(settings.seed, {kTestCorruptionStream}), result.epochs_run);
}

void SsModel::sample_io(std::span<const double> x, std::vector<double>& input, std::vector<double>& target) const {
  if (x.size() != encoder_.input_size()) {
    throw ShapeError("ss_error expects " + std::to_string(encoder_.input_size()) + " features, got " +
                     std::to_string(x.size()));
  }
  const RealMatrix one(1, x.size(), std::vector<double>(x.begin(), x.end()));
  const RealMatrix rep = encoder_.encode(one);
  const std::size_t r = rep.cols();
  if (kind_.is_vime()) {
    input.assign(r, 0.0);
    target.assign(2 * r, 0.0);
    Rng rng(derive_seed(corruption_seed_, {row_hash(x)}));
    vime_corrupt_row(rep.row(0), donors_, kind_.p_corrupt, rng, input, std::span<double>(target).first(r));
    std::copy(rep.row(0).begin(), rep.row(0).end(), target.begin() + static_cast<std::ptrdiff_t>(r));
  } else {
    input.assign(rep.row(0).begin(), rep.row(0).end());
    target.assign(x.begin(), x.end());
  }
}

SsModel::Terms SsModel::vime_terms(std::span<const double> x) const {
  if (!kind_.is_vime()) throw ContractViolation("vime_terms called on a non-VIME pretext model");
  std::vector<double> input;
  std::vector<double> target;
  sample_io(x, input, target);
  const std::size_t n_in = input.size();
  const RealMatrix out = head_.predict(RealMatrix(1, n_in, std::move(input)));
  const std::size_t r = out.cols() / 2;
  const auto pred = out.row(0);
  const std::span<const double> t(target);
  return {nn::loss_eval(nn::LossKind::mask_bce(), pred.first(r), t.first(r)),
          nn::loss_eval(nn::LossKind::mse(), pred.subspan(r), t.subspan(r))};
}

double SsModel::ss_error(std::span<const double> x) const {
  if (kind_.is_vime()) {
    const Terms terms = vime_terms(x);
    return terms.mask_bce + kind_.feature_loss_weight * terms.feature_mse;
  }
  std::vector<double> input;
  std::vector<double> target;
  sample_io(x, input, target);
  const std::size_t n_in = input.size();
  const RealMatrix out = head_.predict(RealMatrix(1, n_in, std::move(input)));
  return nn::loss_eval(nn::LossKind::mse(), out.row(0), target);
}

std::vector<double> SsModel::ss_errors(const RealMatrix& x) const {
  std::vector<double> errs(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) errs[i] = ss_error(x.row(i));
  return errs;
}

std::vector<double> augment_features(std::span<const double> x, double err) {
  std::vector<double> out(x.begin(), x.end());
  out.push_back(err);
  return out;
}

RealMatrix augment_features(const RealMatrix& x, std::span<const double> errs) {
  if (errs.size() != x.rows()) throw ShapeError("one error per row is required to augment features");
  return x.append_column(errs);
}

}  // namespace sscp::pretext
