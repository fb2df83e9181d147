#include "snore/learner.hpp"

#include "snore/errors.hpp"
#include "snore/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace snore {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Vec>;
using MapVecC = Eigen::Map<const Vec>;

using P = ModelParams;

constexpr std::size_t kH1 = kFeatureRows;        // 84
constexpr std::size_t kW1 = kFeatureCells;       // 64
constexpr std::size_t kH2 = kFeatureRows / 2;    // 42
constexpr std::size_t kW2 = kFeatureCells / 2;   // 32
constexpr std::size_t kH3 = P::kPooledRows;      // 21
constexpr std::size_t kW3 = P::kPooledCols;      // 16

constexpr double kProbFloor = 1e-12;

// 3x3 / pad 1 patches: row (c*9 + ky*3 + kx), column y*w + x.
void im2col(const double* in, std::size_t channels, std::size_t h, std::size_t w, RowMat& cols) {
  cols.resize(static_cast<Eigen::Index>(channels * 9), static_cast<Eigen::Index>(h * w));
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = in + c * h * w;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* dst = cols.data() + (c * 9 + ky * 3 + kx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          double* drow = dst + y * w;
          const long sy = static_cast<long>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) {
            std::fill(drow, drow + w, 0.0);
            continue;
          }
          const double* srow = plane + static_cast<std::size_t>(sy) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const long sx = static_cast<long>(x + kx) - 1;
            drow[x] = (sx < 0 || sx >= static_cast<long>(w)) ? 0.0 : srow[sx];
          }
        }
      }
    }
  }
}

void col2im(const RowMat& cols, std::size_t channels, std::size_t h, std::size_t w, double* out) {
  std::fill(out, out + channels * h * w, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = out + c * h * w;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* src = cols.data() + (c * 9 + ky * 3 + kx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          double* prow = plane + static_cast<std::size_t>(sy) * w;
          const double* srow = src + y * w;
          for (std::size_t x = 0; x < w; ++x) {
            const long sx = static_cast<long>(x + kx) - 1;
            if (sx >= 0 && sx < static_cast<long>(w)) prow[sx] += srow[x];
          }
        }
      }
    }
  }
}

// 2x2 max pool over channel planes; records the winning flat index per output.
void max_pool(const RowMat& in, std::size_t h, std::size_t w, std::vector<double>& out,
              std::vector<std::uint32_t>& arg) {
  const std::size_t channels = static_cast<std::size_t>(in.rows());
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  out.resize(channels * oh * ow);
  arg.resize(out.size());
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = in.data() + c * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (2 * y) * w + 2 * x;
        for (std::size_t idx : {(2 * y) * w + 2 * x + 1, (2 * y + 1) * w + 2 * x, (2 * y + 1) * w + 2 * x + 1}) {
          if (plane[idx] > plane[best]) best = idx;
        }
        const std::size_t o = c * oh * ow + y * ow + x;
        out[o] = plane[best];
        arg[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

struct Workspace {
  RowMat cols1, a1, cols2, a2, dcols2, da1, da2;
  std::vector<double> p1, p2, dp1;
  std::vector<std::uint32_t> arg1, arg2;
  Vec h, z;
  Probabilities probs{};
};

void run_forward(const ModelParams& m, const FeatureTensor& x, Workspace& ws) {
  const double* d = m.data.data();
  im2col(x.values.data().data(), 1, kH1, kW1, ws.cols1);
  MapRowC w1(d + P::kConv1W, P::kConv1Out, 9);
  MapVecC b1(d + P::kConv1B, P::kConv1Out);
  ws.a1.noalias() = w1 * ws.cols1;
  ws.a1.colwise() += b1;
  ws.a1 = ws.a1.cwiseMax(0.0);
  max_pool(ws.a1, kH1, kW1, ws.p1, ws.arg1);

  im2col(ws.p1.data(), P::kConv1Out, kH2, kW2, ws.cols2);
  MapRowC w2(d + P::kConv2W, P::kConv2Out, P::kConv1Out * 9);
  MapVecC b2(d + P::kConv2B, P::kConv2Out);
  ws.a2.noalias() = w2 * ws.cols2;
  ws.a2.colwise() += b2;
  ws.a2 = ws.a2.cwiseMax(0.0);
  max_pool(ws.a2, kH2, kW2, ws.p2, ws.arg2);

  MapRowC wd1(d + P::kDense1W, P::kHidden, P::kFlat);
  MapVecC bd1(d + P::kDense1B, P::kHidden);
  MapVecC flat(ws.p2.data(), P::kFlat);
  ws.h.noalias() = wd1 * flat;
  ws.h += bd1;
  ws.h = ws.h.cwiseMax(0.0);

  MapRowC wd2(d + P::kDense2W, P::kClasses, P::kHidden);
  MapVecC bd2(d + P::kDense2B, P::kClasses);
  ws.z.noalias() = wd2 * ws.h;
  ws.z += bd2;

  const double zmax = std::max(ws.z[0], ws.z[1]);
  const double e0 = std::exp(ws.z[0] - zmax);
  const double e1 = std::exp(ws.z[1] - zmax);
  ws.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
}

double example_loss(const Probabilities& p, int label) {
  const double q = std::clamp(p[static_cast<std::size_t>(label)], kProbFloor, 1.0 - kProbFloor);
  return -std::log(q);
}

void check_label(int label) {
  if (label != 0 && label != 1) throw ArgumentError("labels must be 0 or 1");
}

}  // namespace

FeatureTensor featurize(const Spectrogram& spec) {
  const std::size_t frames = spec.frames();
  const std::size_t bins = spec.bins();
  if (frames < kFeatureCells) throw ArgumentError("spectrogram has fewer than 64 frames");
  if (bins < 1) throw ArgumentError("spectrogram has no bins");

  // Time pooling: cell c covers frames [c*F/64, (c+1)*F/64).
  Matrix pooled(bins, kFeatureCells);
  for (std::size_t c = 0; c < kFeatureCells; ++c) {
    const std::size_t lo = c * frames / kFeatureCells;
    const std::size_t hi = (c + 1) * frames / kFeatureCells;
    for (std::size_t k = 0; k < bins; ++k) {
      const auto row = spec.values.row(k);
      double acc = 0.0;
      for (std::size_t m = lo; m < hi; ++m) acc += row[m];
      pooled(k, c) = acc / static_cast<double>(hi - lo);
    }
  }

  FeatureTensor out;
  out.kind = spec.kind;
  if (bins == kFeatureRows) {
    out.values = std::move(pooled);
    return out;
  }
  // Linear interpolation over bin index onto 84 rows spanning the same range.
  for (std::size_t r = 0; r < kFeatureRows; ++r) {
    const double pos = bins == 1 ? 0.0
                                 : static_cast<double>(r) * static_cast<double>(bins - 1) /
                                       static_cast<double>(kFeatureRows - 1);
    const auto k0 = static_cast<std::size_t>(std::floor(pos));
    const std::size_t k1 = std::min(k0 + 1, bins - 1);
    const double frac = pos - static_cast<double>(k0);
    for (std::size_t c = 0; c < kFeatureCells; ++c) {
      out.values(r, c) = (1.0 - frac) * pooled(k0, c) + frac * pooled(k1, c);
    }
  }
  return out;
}

Standardizer Standardizer::fit(std::span<const FeatureTensor* const> train) {
  if (train.empty()) throw ArgumentError("cannot fit a standardizer on no data");
  Standardizer s;
  s.mean_.assign(kFeatureRows, 0.0);
  s.inv_std_.assign(kFeatureRows, 0.0);
  const double count = static_cast<double>(train.size() * kFeatureCells);
  for (const FeatureTensor* t : train) {
    for (std::size_t r = 0; r < kFeatureRows; ++r) {
      for (double v : t->values.row(r)) s.mean_[r] += std::log(kLogFloor + v);
    }
  }
  for (double& m : s.mean_) m /= count;
  std::vector<double> var(kFeatureRows, 0.0);
  for (const FeatureTensor* t : train) {
    for (std::size_t r = 0; r < kFeatureRows; ++r) {
      for (double v : t->values.row(r)) {
        const double dlt = std::log(kLogFloor + v) - s.mean_[r];
        var[r] += dlt * dlt;
      }
    }
  }
  for (std::size_t r = 0; r < kFeatureRows; ++r) {
    const double sd = std::sqrt(var[r] / count);
    s.inv_std_[r] = sd > 1e-12 ? 1.0 / sd : 0.0;
  }
  return s;
}

Standardizer Standardizer::fit(std::span<const FeatureTensor> train) {
  std::vector<const FeatureTensor*> ptrs;
  ptrs.reserve(train.size());
  for (const auto& t : train) ptrs.push_back(&t);
  return fit(std::span<const FeatureTensor* const>(ptrs));
}

FeatureTensor Standardizer::apply(const FeatureTensor& x) const {
  FeatureTensor out;
  out.kind = x.kind;
  for (std::size_t r = 0; r < kFeatureRows; ++r) {
    for (std::size_t c = 0; c < kFeatureCells; ++c) {
      out.values(r, c) = (std::log(kLogFloor + x.values(r, c)) - mean_[r]) * inv_std_[r];
    }
  }
  return out;
}

ModelParams ModelParams::he_init(std::uint64_t seed) {
  ModelParams m;
  Rng rng(seed);
  const auto fill = [&](std::size_t offset, std::size_t count, double fan_in) {
    const double sd = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < count; ++i) m.data[offset + i] = sd * rng.normal();
  };
  fill(kConv1W, kConv1B - kConv1W, 9.0);
  fill(kConv2W, kConv2B - kConv2W, kConv1Out * 9.0);
  fill(kDense1W, kDense1B - kDense1W, static_cast<double>(kFlat));
  fill(kDense2W, kDense2B - kDense2W, static_cast<double>(kHidden));
  return m;
}

Probabilities forward(const ModelParams& model, const FeatureTensor& x) {
  Workspace ws;
  run_forward(model, x, ws);
  return ws.probs;
}

double bce_loss(std::span<const Probabilities> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw ArgumentError("probabilities and labels differ in length");
  if (probs.empty()) throw ArgumentError("empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    check_label(labels[i]);
    acc += example_loss(probs[i], labels[i]);
  }
  return acc / static_cast<double>(probs.size());
}

double batch_loss(const ModelParams& model, std::span<const Example> batch) {
  if (batch.empty()) throw ArgumentError("empty batch");
  Workspace ws;
  double acc = 0.0;
  for (const auto& ex : batch) {
    check_label(ex.label);
    run_forward(model, *ex.x, ws);
    acc += example_loss(ws.probs, ex.label);
  }
  return acc / static_cast<double>(batch.size());
}

namespace {

// Loss plus a fingerprint of the linear region: every ReLU on/off state and
// every pooling winner. Equal fingerprints mean no kink lies in between.
std::pair<double, std::uint64_t> loss_and_region(const ModelParams& model, std::span<const Example> batch) {
  Workspace ws;
  double acc = 0.0;
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 1099511628211ull; };
  for (const auto& ex : batch) {
    run_forward(model, *ex.x, ws);
    acc += example_loss(ws.probs, ex.label);
    for (auto a : ws.arg1) mix(a);
    for (auto a : ws.arg2) mix(a);
    for (Eigen::Index i = 0; i < ws.a1.size(); ++i) mix(ws.a1.data()[i] > 0.0);
    for (Eigen::Index i = 0; i < ws.a2.size(); ++i) mix(ws.a2.data()[i] > 0.0);
    for (Eigen::Index i = 0; i < ws.h.size(); ++i) mix(ws.h[i] > 0.0);
  }
  return {acc / static_cast<double>(batch.size()), h};
}

}  // namespace

LossAndGradients backward(const ModelParams& model, std::span<const Example> batch) {
  if (batch.empty()) throw ArgumentError("empty batch");
  LossAndGradients out;
  Workspace ws;
  const double* d = model.data.data();
  double* g = out.grads.data.data();
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  MapRowC w2(d + P::kConv2W, P::kConv2Out, P::kConv1Out * 9);
  MapRowC wd1(d + P::kDense1W, P::kHidden, P::kFlat);
  MapRowC wd2(d + P::kDense2W, P::kClasses, P::kHidden);
  MapRow gw1(g + P::kConv1W, P::kConv1Out, 9);
  MapVec gb1(g + P::kConv1B, P::kConv1Out);
  MapRow gw2(g + P::kConv2W, P::kConv2Out, P::kConv1Out * 9);
  MapVec gb2(g + P::kConv2B, P::kConv2Out);
  MapRow gwd1(g + P::kDense1W, P::kHidden, P::kFlat);
  MapVec gbd1(g + P::kDense1B, P::kHidden);
  MapRow gwd2(g + P::kDense2W, P::kClasses, P::kHidden);
  MapVec gbd2(g + P::kDense2B, P::kClasses);

  for (const auto& ex : batch) {
    check_label(ex.label);
    run_forward(model, *ex.x, ws);
    out.loss += example_loss(ws.probs, ex.label) * inv_n;

    Vec dz(2);
    dz[0] = (ws.probs[0] - (ex.label == 0 ? 1.0 : 0.0)) * inv_n;
    dz[1] = (ws.probs[1] - (ex.label == 1 ? 1.0 : 0.0)) * inv_n;
    gwd2.noalias() += dz * ws.h.transpose();
    gbd2 += dz;

    Vec dh = wd2.transpose() * dz;
    for (Eigen::Index i = 0; i < dh.size(); ++i) {
      if (ws.h[i] <= 0.0) dh[i] = 0.0;
    }
    MapVecC flat(ws.p2.data(), P::kFlat);
    gwd1.noalias() += dh * flat.transpose();
    gbd1 += dh;
    const Vec dflat = wd1.transpose() * dh;

    // Unpool 2 and ReLU 2.
    ws.da2.setZero(P::kConv2Out, kH2 * kW2);
    for (std::size_t c = 0; c < P::kConv2Out; ++c) {
      for (std::size_t j = 0; j < kH3 * kW3; ++j) {
        const std::size_t o = c * kH3 * kW3 + j;
        const std::size_t src = ws.arg2[o];
        if (ws.a2(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(src)) > 0.0) {
          ws.da2(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(src)) += dflat[static_cast<Eigen::Index>(o)];
        }
      }
    }
    gw2.noalias() += ws.da2 * ws.cols2.transpose();
    gb2 += ws.da2.rowwise().sum();
    ws.dcols2.noalias() = w2.transpose() * ws.da2;
    ws.dp1.resize(P::kConv1Out * kH2 * kW2);
    col2im(ws.dcols2, P::kConv1Out, kH2, kW2, ws.dp1.data());

    // Unpool 1 and ReLU 1.
    ws.da1.setZero(P::kConv1Out, kH1 * kW1);
    for (std::size_t c = 0; c < P::kConv1Out; ++c) {
      for (std::size_t j = 0; j < kH2 * kW2; ++j) {
        const std::size_t o = c * kH2 * kW2 + j;
        const std::size_t src = ws.arg1[o];
        if (ws.a1(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(src)) > 0.0) {
          ws.da1(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(src)) += ws.dp1[o];
        }
      }
    }
    gw1.noalias() += ws.da1 * ws.cols1.transpose();
    gb1 += ws.da1.rowwise().sum();

    const int predicted = ws.probs[1] > ws.probs[0] ? 1 : 0;
    if (predicted == ex.label) ++out.correct;
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || batch_size == 0 || max_epochs < 1 || patience < 1 ||
      !(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0) ||
      !(adam_eps > 0.0)) {
    throw ArgumentError("invalid training configuration");
  }
  if (patience > max_epochs) throw ArgumentError("patience exceeds the epoch budget");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, long t,
               const TrainConfig& cfg) {
  if (t < 1) throw ArgumentError("Adam step count starts at 1");
  if (grads.size() != params.size()) throw ArgumentError("gradient and parameter sizes differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ArgumentError("optimizer state does not match the parameters");
  }
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double gi = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * gi;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * gi * gi;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
  state.step = t;
}

bool EarlyStopping::update(int epoch, double val_loss) {
  if (best_epoch_ == 0 || val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch;
    waited_ = 0;
    return true;
  }
  ++waited_;
  return false;
}

double accuracy(const ModelParams& model, std::span<const Example> set) {
  if (set.empty()) throw ArgumentError("empty evaluation set");
  Workspace ws;
  std::size_t correct = 0;
  for (const auto& ex : set) {
    run_forward(model, *ex.x, ws);
    if ((ws.probs[1] > ws.probs[0] ? 1 : 0) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

namespace {

struct Evaluation {
  double loss = 0.0;
  double acc = 0.0;
};

Evaluation evaluate(const ModelParams& model, std::span<const Example> set) {
  Workspace ws;
  Evaluation e;
  std::size_t correct = 0;
  for (const auto& ex : set) {
    check_label(ex.label);
    run_forward(model, *ex.x, ws);
    e.loss += example_loss(ws.probs, ex.label);
    if ((ws.probs[1] > ws.probs[0] ? 1 : 0) == ex.label) ++correct;
  }
  e.loss /= static_cast<double>(set.size());
  e.acc = static_cast<double>(correct) / static_cast<double>(set.size());
  return e;
}

}  // namespace

TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set,
                  const TrainConfig& cfg, const ModelParams& init) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw ArgumentError("training and validation sets must be non-empty");

  TrainResult result;
  ModelParams params = init;
  result.model = params;
  AdamState state;
  EarlyStopping stopper(cfg.patience);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Example> batch;
  batch.reserve(cfg.batch_size);
  long step = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng(child_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
      const auto lg = backward(params, batch);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      correct += lg.correct;
      adam_step(params.data, lg.grads.data, state, ++step, cfg);
    }
    const auto val = evaluate(params, val_set);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    stats.val_loss = val.loss;
    stats.val_acc = val.acc;
    result.report.epochs.push_back(stats);
    result.report.stopped_epoch = epoch;
    if (stopper.update(epoch, val.loss)) result.model = params;
    if (stopper.should_stop()) break;
  }
  result.report.best_epoch = stopper.best_epoch();
  result.report.best_val_loss = stopper.best_loss();
  return result;
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set,
                  const TrainConfig& cfg) {
  return train(train_set, val_set, cfg, ModelParams::he_init(child_seed(cfg.seed, hash_tag("init"))));
}

GradCheckResult grad_check(const ModelParams& model, std::span<const Example> batch, double eps,
                           std::size_t n_coords, std::uint64_t seed, const BackwardFn& backward_fn) {
  if (batch.empty()) throw ArgumentError("empty batch");
  if (!(eps > 0.0)) throw ArgumentError("step must be positive");
  const auto analytic = backward_fn ? backward_fn(model, batch) : backward(model, batch);

  // Below this both gradients are treated as vanishing; central differences
  // on O(1) losses carry ~1e-11 of rounding noise.
  constexpr double kVanishing = 1e-7;

  // Draws cycle through the parameter blocks so the small convolution blocks
  // are probed as often as the large dense matrix.
  using P = ModelParams;
  constexpr std::array<std::size_t, 9> kBlocks{P::kConv1W,  P::kConv1B,  P::kConv2W,  P::kConv2B, P::kDense1W,
                                               P::kDense1B, P::kDense2W, P::kDense2B, P::kSize};

  for (const auto& ex : batch) check_label(ex.label);
  const std::uint64_t region = loss_and_region(model, batch).second;
  Rng rng(seed);
  GradCheckResult res;
  ModelParams probe = model;
  for (std::size_t i = 0; i < n_coords; ++i) {
    const std::size_t b = i % (kBlocks.size() - 1);
    const auto idx = kBlocks[b] + static_cast<std::size_t>(rng.below(kBlocks[b + 1] - kBlocks[b]));
    const double orig = probe.data[idx];
    probe.data[idx] = orig + eps;
    const auto [up, region_up] = loss_and_region(probe, batch);
    probe.data[idx] = orig - eps;
    const auto [down, region_down] = loss_and_region(probe, batch);
    probe.data[idx] = orig;
    // A difference straddling a kink measures a mix of two slopes.
    if (region_up != region || region_down != region) {
      ++res.kinks_skipped;
      continue;
    }
    const double gn = (up - down) / (2.0 * eps);
    const double ga = analytic.grads.data[idx];
    if (std::max(std::abs(ga), std::abs(gn)) < kVanishing) continue;
    const double rel = std::abs(ga - gn) / std::max({std::abs(ga), std::abs(gn), 1e-8});
    res.max_relative_error = std::max(res.max_relative_error, rel);
    ++res.coordinates_checked;
  }
  return res;
}

std::vector<double> pooled_statistics(const FeatureTensor& x) {
  std::vector<double> out(2 * kFeatureRows);
  for (std::size_t r = 0; r < kFeatureRows; ++r) {
    const auto row = x.values.row(r);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    out[r] = mean;
    out[kFeatureRows + r] = std::sqrt(var / static_cast<double>(row.size()));
  }
  return out;
}

double LogisticModel::predict_proba(std::span<const double> features) const {
  if (features.size() != weights.size()) throw ArgumentError("feature size does not match the model");
  double z = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * (features[i] - mean[i]) * inv_std[i];
  return 1.0 / (1.0 + std::exp(-z));
}

LogisticModel fit_logistic_baseline(const std::vector<std::vector<double>>& features,
                                    std::span<const int> labels, const LogisticConfig& cfg) {
  cfg.train.validate();
  if (features.size() != labels.size() || features.empty()) {
    throw ArgumentError("features and labels must be non-empty and equally long");
  }
  const std::size_t dim = features.front().size();
  std::size_t positives = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != dim) throw ArgumentError("ragged feature matrix");
    check_label(labels[i]);
    positives += static_cast<std::size_t>(labels[i]);
  }
  if (positives == 0 || positives == labels.size()) throw ArgumentError("labels contain a single class");

  LogisticModel model;
  model.mean.assign(dim, 0.0);
  model.inv_std.assign(dim, 0.0);
  const double n = static_cast<double>(features.size());
  for (const auto& f : features) {
    for (std::size_t j = 0; j < dim; ++j) model.mean[j] += f[j] / n;
  }
  for (std::size_t j = 0; j < dim; ++j) {
    double var = 0.0;
    for (const auto& f : features) var += (f[j] - model.mean[j]) * (f[j] - model.mean[j]);
    const double sd = std::sqrt(var / n);
    model.inv_std[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
  }
  std::vector<std::vector<double>> z(features.size(), std::vector<double>(dim));
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) z[i][j] = (features[i][j] - model.mean[j]) * model.inv_std[j];
  }

  std::vector<double> theta(dim + 1, 0.0);  // weights then bias
  std::vector<double> grad(dim + 1);
  AdamState state;
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 1; epoch <= cfg.train.max_epochs; ++epoch) {
    Rng rng(child_seed(cfg.train.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += cfg.train.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.train.batch_size);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t s = start; s < stop; ++s) {
        const auto& x = z[order[s]];
        double logit = theta[dim];
        for (std::size_t j = 0; j < dim; ++j) logit += theta[j] * x[j];
        const double err = (1.0 / (1.0 + std::exp(-logit)) - labels[order[s]]) * inv_b;
        for (std::size_t j = 0; j < dim; ++j) grad[j] += err * x[j];
        grad[dim] += err;
      }
      for (std::size_t j = 0; j < dim; ++j) grad[j] += cfg.l2 * theta[j];
      adam_step(theta, grad, state, ++step, cfg.train);
    }
  }
  model.weights.assign(theta.begin(), theta.end() - 1);
  model.bias = theta[dim];
  return model;
}

}  // namespace snore
