#include "snore/hpss.hpp"

#include "snore/errors.hpp"

#include <algorithm>
#include <cmath>

namespace snore {

void HpssConfig::validate() const {
  if (harmonic_length < 1 || harmonic_length % 2 == 0) {
    throw ArgumentError("harmonic filter length must be odd and positive");
  }
  if (percussive_length_fixed && (*percussive_length_fixed < 1 || *percussive_length_fixed % 2 == 0)) {
    throw ArgumentError("fixed percussive length must be odd and positive");
  }
  if (percussive_length_min < 1 || percussive_length_min % 2 == 0) {
    throw ArgumentError("percussive length floor must be odd and positive");
  }
  if (!(mask_power > 0.0) || !std::isfinite(mask_power)) {
    throw ArgumentError("mask power must be positive");
  }
}

std::vector<int> percussive_kernel_lengths(std::span<const double> bin_freqs_hz,
                                           const HpssConfig& cfg) {
  cfg.validate();
  const std::size_t k_bins = bin_freqs_hz.size();
  if (k_bins < 2) throw ArgumentError("need at least two bins");
  for (std::size_t k = 0; k + 1 < k_bins; ++k) {
    if (!(bin_freqs_hz[k + 1] > bin_freqs_hz[k]) || !(bin_freqs_hz[k] > 0.0)) {
      throw ArgumentError("bin frequencies must be positive and strictly increasing");
    }
  }
  if (cfg.percussive_length_fixed) {
    return std::vector<int>(k_bins, *cfg.percussive_length_fixed);
  }
  if (!cfg.sixteenth_rule) return std::vector<int>(k_bins, cfg.percussive_length_min);

  std::vector<int> out(k_bins);
  for (std::size_t k = 0; k < k_bins; ++k) {
    const std::size_t a = k + 1 < k_bins ? k : k - 1;
    const double ratio = bin_freqs_hz[a + 1] / bin_freqs_hz[a];
    const double target = 1.0 / 16.0;  // span relative to f_k
    int n = cfg.percussive_length_min;
    // ratio^(n/2) - ratio^(-n/2) grows without bound, so this terminates.
    while (std::pow(ratio, n / 2.0) - std::pow(ratio, -n / 2.0) < target) n += 2;
    out[k] = n;
  }
  return out;
}

namespace {

// Median of buf; reorders buf.
double median_of(std::vector<double>& buf) {
  const std::size_t n = buf.size();
  const auto mid = buf.begin() + static_cast<long>(n / 2);
  std::nth_element(buf.begin(), mid, buf.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(buf.begin(), mid);
  return 0.5 * (lower + upper);
}

Spectrogram relabel_like(const Spectrogram& x) {
  Spectrogram out;
  out.bin_freqs_hz = x.bin_freqs_hz;
  out.hop_samples = x.hop_samples;
  out.sample_rate = x.sample_rate;
  out.frame_offset_samples = x.frame_offset_samples;
  out.kind = x.kind;
  out.values = Matrix(x.bins(), x.frames());
  return out;
}

}  // namespace

Spectrogram median_filter_time(const Spectrogram& x, int length) {
  if (length < 1 || length % 2 == 0) throw ArgumentError("median length must be odd and positive");
  Spectrogram out = relabel_like(x);
  const long half = length / 2;
  const auto frames = static_cast<long>(x.frames());
  std::vector<double> buf;
  buf.reserve(static_cast<std::size_t>(length));
  for (std::size_t k = 0; k < x.bins(); ++k) {
    const auto src = x.values.row(k);
    auto dst = out.values.row(k);
    for (long m = 0; m < frames; ++m) {
      const long lo = std::max(0L, m - half);
      const long hi = std::min(frames - 1, m + half);
      buf.assign(src.begin() + lo, src.begin() + hi + 1);
      dst[static_cast<std::size_t>(m)] = median_of(buf);
    }
  }
  return out;
}

Spectrogram median_filter_freq(const Spectrogram& x, std::span<const int> lengths) {
  if (lengths.size() != x.bins()) throw ArgumentError("one filter length per bin is required");
  for (int l : lengths) {
    if (l < 1 || l % 2 == 0) throw ArgumentError("median length must be odd and positive");
  }
  Spectrogram out = relabel_like(x);
  const auto bins = static_cast<long>(x.bins());
  std::vector<double> buf;
  for (long k = 0; k < bins; ++k) {
    const long half = lengths[static_cast<std::size_t>(k)] / 2;
    const long lo = std::max(0L, k - half);
    const long hi = std::min(bins - 1, k + half);
    for (std::size_t m = 0; m < x.frames(); ++m) {
      buf.clear();
      for (long j = lo; j <= hi; ++j) buf.push_back(x.values(static_cast<std::size_t>(j), m));
      out.values(static_cast<std::size_t>(k), m) = median_of(buf);
    }
  }
  return out;
}

Matrix wiener_mask(const Spectrogram& harmonic, const Spectrogram& percussive, double power) {
  if (!harmonic.values.same_shape(percussive.values)) throw ArgumentError("mask inputs differ in shape");
  if (!(power > 0.0)) throw ArgumentError("mask power must be positive");
  Matrix mask(harmonic.bins(), harmonic.frames());
  const auto& h = harmonic.values.data();
  const auto& p = percussive.values.data();
  auto& m = mask.data();
  const bool squared = power == 2.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double hp = squared ? h[i] * h[i] : std::pow(h[i], power);
    const double pp = squared ? p[i] * p[i] : std::pow(p[i], power);
    const double den = hp + pp;
    m[i] = den > 0.0 ? hp / den : 0.0;
  }
  return mask;
}

Spectrogram harmonic_enhance(const Spectrogram& x, const Matrix& mask) {
  if (!x.values.same_shape(mask)) throw ArgumentError("mask and spectrogram differ in shape");
  Spectrogram out = relabel_like(x);
  out.kind = TfrKind::harmonic;
  auto& dst = out.values.data();
  const auto& src = x.values.data();
  const auto& w = mask.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = w[i] * src[i];
  return out;
}

HpssResult hpss_separate(const Spectrogram& cqt, const HpssConfig& cfg) {
  cfg.validate();
  HpssResult r;
  r.percussive_lengths = percussive_kernel_lengths(cqt.bin_freqs_hz, cfg);
  r.harmonic = median_filter_time(cqt, cfg.harmonic_length);
  r.percussive = median_filter_freq(cqt, r.percussive_lengths);
  r.mask = wiener_mask(r.harmonic, r.percussive, cfg.mask_power);
  r.enhanced = harmonic_enhance(cqt, r.mask);
  return r;
}

HpssResult hpss_pipeline(const AudioClip& clip, const TfrConfig& tfr_cfg, const HpssConfig& hpss_cfg) {
  const AudioClip at_rate =
      clip.sample_rate == tfr_cfg.cqt_rate ? clip : resample(clip, tfr_cfg.cqt_rate);
  return hpss_separate(cqt_magnitude(at_rate, tfr_cfg), hpss_cfg);
}

}  // namespace snore
