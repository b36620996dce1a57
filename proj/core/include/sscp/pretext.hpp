#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sscp/matrix.hpp"
#include "sscp/nn/mlp.hpp"
#include "sscp/random.hpp"

namespace sscp::pretext {

struct PretextKind {
  enum class Type { kAutoencoder, kVime };

  Type type = Type::kVime;
  double p_corrupt = 0.3;
  /// Coefficient of the feature-reconstruction term; the mask term has 1.
  double feature_loss_weight = 2.0;

  static PretextKind autoencoder() { return {Type::kAutoencoder, 0.0, 1.0}; }
  static PretextKind vime(double p_corrupt = 0.3, double feature_loss_weight = 2.0) {
    return {Type::kVime, p_corrupt, feature_loss_weight};
  }

  bool is_vime() const noexcept { return type == Type::kVime; }
  void validate() const;
};

struct Corruption {
  RealMatrix corrupted;
  /// 1 where the entry was replaced, 0 elsewhere.
  RealMatrix mask;
};

/// Bernoulli(p) mask per entry; a masked entry takes the same column's value
/// from a uniformly chosen other row. Needs at least two rows.
Corruption vime_corrupt(const RealMatrix& reps, double p_corrupt, Rng& rng);

/// Corrupts one row using swap values from `donors` (any row may donate).
void vime_corrupt_row(std::span<const double> row, const RealMatrix& donors, double p_corrupt, Rng& rng,
                      std::span<double> corrupted, std::span<double> mask);

/// The representation the pretext head consumes: either the leading layers
/// of a trained network (kept bit-identical from here on) or the raw input.
class FrozenEncoder {
 public:
  static FrozenEncoder identity(std::size_t dim);
  /// Encoder layers of `model`. Throws ContractViolation when the model has
  /// not been trained.
  static FrozenEncoder from_model(const nn::Mlp& model);

  RealMatrix encode(const RealMatrix& x) const;
  std::size_t input_size() const noexcept { return input_size_; }
  std::size_t output_size() const noexcept;
  bool is_identity() const noexcept { return !network_.has_value(); }
  /// Layer widths from input to representation.
  std::vector<std::size_t> widths() const;
  const std::optional<nn::Mlp>& network() const noexcept { return network_; }

 private:
  std::size_t input_size_ = 0;
  std::optional<nn::Mlp> network_;
};

/// Head training settings. Dropout defaults to 0 for pretext heads.
struct PretextSettings {
  double learning_rate = 5e-4;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  /// Hidden widths of the head; empty picks the default architecture.
  std::vector<std::size_t> hidden;
  std::vector<nn::Activation> hidden_activations;
  /// Encoder boundary recorded on the head network (0 = all but last).
  std::size_t head_encoder_boundary = 0;
  /// Rows kept as swap donors for test-time corruption.
  std::size_t donor_pool_size = 256;
};

/// Head architecture for `kind` on top of `encoder`. Autoencoder heads mirror
/// the encoder widths and output the encoder's input width; VIME heads use
/// one hidden layer of the representation width and emit [mask logits,
/// reconstructed representation].
nn::MlpConfig default_head_config(const PretextKind& kind, const FrozenEncoder& encoder,
                                  const PretextSettings& settings);

/// f_ss = head(encoder(x)) with a per-sample loss usable as a feature.
class SsModel {
 public:
  /// Trains the head on `data` (raw inputs). The encoder is applied once and
  /// never updated.
  static SsModel train(const FrozenEncoder& encoder, const PretextKind& kind, const RealMatrix& data,
                       const PretextSettings& settings);

  /// Per-sample pretext loss. VIME corruption is seeded from the bytes of
  /// `x` and the model seed, so the result is a pure function of (model, x).
  double ss_error(std::span<const double> x) const;
  std::vector<double> ss_errors(const RealMatrix& x) const;

  /// The VIME loss split into its mask and feature parts for one sample.
  struct Terms {
    double mask_bce = 0.0;
    double feature_mse = 0.0;
  };
  Terms vime_terms(std::span<const double> x) const;

  const FrozenEncoder& encoder() const noexcept { return encoder_; }
  const nn::Mlp& head() const noexcept { return head_; }
  const PretextKind& kind() const noexcept { return kind_; }
  const RealMatrix& donor_pool() const noexcept { return donors_; }
  std::size_t epochs_run() const noexcept { return epochs_run_; }

 private:
  SsModel(FrozenEncoder encoder, nn::Mlp head, PretextKind kind, RealMatrix donors, std::uint64_t seed,
          std::size_t epochs_run);

  /// Head input and target for one sample.
  void sample_io(std::span<const double> x, std::vector<double>& input, std::vector<double>& target) const;

  FrozenEncoder encoder_;
  nn::Mlp head_;
  PretextKind kind_;
  RealMatrix donors_;
  std::uint64_t corruption_seed_ = 0;
  std::size_t epochs_run_ = 0;
};

/// x followed by the scalar error.
std::vector<double> augment_features(std::span<const double> x, double err);
RealMatrix augment_features(const RealMatrix& x, std::span<const double> errs);

}  // namespace sscp::pretext
