#pragma once

#include "snore/matrix.hpp"
#include "snore/tfr.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace snore {

inline constexpr std::size_t kFeatureRows = 84;
inline constexpr std::size_t kFeatureCells = 64;

/// Fixed-geometry network input (84 rows x 64 time cells).
struct FeatureTensor {
  Matrix values{kFeatureRows, kFeatureCells};
  TfrKind kind = TfrKind::cqt;
};

/// Average-pools frames into 64 contiguous near-equal groups and, when the
/// spectrogram does not have 84 rows, linearly resamples rows over bin index.
/// No standardization; see Standardizer.
FeatureTensor featurize(const Spectrogram& spec);

/// Per-row statistics fitted on training tensors. Values are log-compressed,
/// log(floor + x), before the z-score.
class Standardizer {
public:
  static constexpr double kLogFloor = 1e-6;

  static Standardizer fit(std::span<const FeatureTensor> train);
  static Standardizer fit(std::span<const FeatureTensor* const> train);
  FeatureTensor apply(const FeatureTensor& x) const;

  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& scale() const noexcept { return inv_std_; }

private:
  std::vector<double> mean_;
  std::vector<double> inv_std_;
};

/// All network weights in one flat buffer. Layout (row-major blocks):
/// conv1 w[8][1][3][3], conv1 b[8], conv2 w[16][8][3][3], conv2 b[16],
/// dense1 w[16][5376], dense1 b[16], dense2 w[2][16], dense2 b[2].
struct ModelParams {
  static constexpr std::size_t kConv1Out = 8;
  static constexpr std::size_t kConv2Out = 16;
  static constexpr std::size_t kHidden = 16;
  static constexpr std::size_t kClasses = 2;
  static constexpr std::size_t kPooledRows = kFeatureRows / 4;   // 21
  static constexpr std::size_t kPooledCols = kFeatureCells / 4;  // 16
  static constexpr std::size_t kFlat = kConv2Out * kPooledRows * kPooledCols;

  static constexpr std::size_t kConv1W = 0;
  static constexpr std::size_t kConv1B = kConv1W + kConv1Out * 9;
  static constexpr std::size_t kConv2W = kConv1B + kConv1Out;
  static constexpr std::size_t kConv2B = kConv2W + kConv2Out * kConv1Out * 9;
  static constexpr std::size_t kDense1W = kConv2B + kConv2Out;
  static constexpr std::size_t kDense1B = kDense1W + kHidden * kFlat;
  static constexpr std::size_t kDense2W = kDense1B + kHidden;
  static constexpr std::size_t kDense2B = kDense2W + kClasses * kHidden;
  static constexpr std::size_t kSize = kDense2B + kClasses;

  std::vector<double> data = std::vector<double>(kSize, 0.0);

  static ModelParams zeros() { return {}; }
  /// He-style Gaussian weights scaled by fan-in; zero biases.
  static ModelParams he_init(std::uint64_t seed);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using Gradients = ModelParams;

/// Class probabilities {interferer, snore}.
using Probabilities = std::array<double, 2>;

Probabilities forward(const ModelParams& model, const FeatureTensor& x);

struct Example {
  const FeatureTensor* x = nullptr;
  int label = 0;  // 1 = snore
};

/// Mean over the batch of -log p(true class), probabilities clamped to [1e-12, 1 - 1e-12].
double bce_loss(std::span<const Probabilities> probs, std::span<const int> labels);

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
  std::size_t correct = 0;  // argmax hits in the batch
};

/// Exact gradients of the mean batch loss.
LossAndGradients backward(const ModelParams& model, std::span<const Example> batch);

double batch_loss(const ModelParams& model, std::span<const Example> batch);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  int max_epochs = 100;
  int patience = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// One bias-corrected Adam update; `t` is the 1-based step count.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, long t,
               const TrainConfig& cfg);

/// Validation-loss patience counter.
class EarlyStopping {
public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Records the loss of `epoch` (1-based). Returns true when this epoch is a
  /// new best.
  bool update(int epoch, double val_loss);
  bool should_stop() const noexcept { return waited_ >= patience_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_; }

private:
  int patience_;
  int waited_ = 0;
  int best_epoch_ = 0;
  double best_ = 0.0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int stopped_epoch = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

struct TrainResult {
  ModelParams model;
  TrainReport report;
};

/// Adam on seeded-shuffled mini-batches with validation-loss early stopping.
/// Returns the weights of the best validation epoch.
TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set,
                  const TrainConfig& cfg, const ModelParams& init);
TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set,
                  const TrainConfig& cfg);

double accuracy(const ModelParams& model, std::span<const Example> set);

using BackwardFn = std::function<LossAndGradients(const ModelParams&, std::span<const Example>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t kinks_skipped = 0;
};

/// Central finite differences on `n_coords` randomly drawn parameters, taken in
/// turn from each weight and bias block.
/// Coordinates where both gradients vanish are skipped, as are those whose
/// ±eps probe flips a ReLU or a pooling winner (counted in kinks_skipped).
GradCheckResult grad_check(const ModelParams& model, std::span<const Example> batch, double eps = 1e-5,
                           std::size_t n_coords = 200, std::uint64_t seed = 0,
                           const BackwardFn& backward_fn = {});

/// 168-dim summary: per-row mean then per-row standard deviation over cells.
std::vector<double> pooled_statistics(const FeatureTensor& x);

struct LogisticConfig {
  double l2 = 1e-3;
  TrainConfig train;
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> mean;
  std::vector<double> inv_std;

  double predict_proba(std::span<const double> features) const;
};

/// L2-regularized logistic regression (bias unpenalized) trained with Adam on
/// standardized features for cfg.train.max_epochs epochs.
LogisticModel fit_logistic_baseline(const std::vector<std::vector<double>>& features,
                                    std::span<const int> labels, const LogisticConfig& cfg);

}  // namespace snore
