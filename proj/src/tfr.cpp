#include "snore/tfr.hpp"

#include "snore/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace snore {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

const char* to_string(TfrKind kind) noexcept {
  switch (kind) {
    case TfrKind::stft: return "stft";
    case TfrKind::mel: return "mel";
    case TfrKind::cqt: return "cqt";
    case TfrKind::harmonic: return "harmonic";
  }
  return "unknown";
}

std::optional<TfrKind> parse_tfr_kind(std::string_view text) noexcept {
  if (text == "stft") return TfrKind::stft;
  if (text == "mel") return TfrKind::mel;
  if (text == "cqt") return TfrKind::cqt;
  if (text == "harmonic") return TfrKind::harmonic;
  return std::nullopt;
}

void TfrConfig::validate() const {
  if (stft_window <= 0 || stft_hop <= 0 || stft_rate <= 0 || mel_filters <= 0 || cqt_bins <= 0 ||
      cqt_bins_per_octave <= 0 || cqt_hop <= 0 || cqt_rate <= 0) {
    throw ArgumentError("TFR counts and rates must be positive");
  }
  if (!(cqt_fmin_hz > 0.0)) throw ArgumentError("CQT fmin must be positive");
  if (!(mel_fmax_hz > mel_fmin_hz) || mel_fmin_hz < 0.0) {
    throw ArgumentError("mel band must satisfy 0 <= fmin < fmax");
  }
  const double top = cqt_fmin_hz * std::pow(2.0, (cqt_bins - 1.0) / cqt_bins_per_octave);
  if (!(top < cqt_rate / 2.0)) throw ArgumentError("top CQT bin reaches Nyquist");
}

std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::vector<std::complex<double>> windowed_dft(std::span<const double> frame) {
  const std::size_t n = frame.size();
  if (n == 0) throw ArgumentError("empty frame");
  const auto w = periodic_hann(n);
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = kTwoPi * static_cast<double>((k * i) % n) / static_cast<double>(n);
      const double v = w[i] * frame[i];
      re += v * std::cos(ang);
      im -= v * std::sin(ang);
    }
    out[k] = {re, im};
  }
  return out;
}

Spectrogram stft_magnitude(const AudioClip& clip, const TfrConfig& cfg) {
  cfg.validate();
  if (clip.sample_rate != cfg.stft_rate) {
    throw ArgumentError("STFT expects a " + std::to_string(cfg.stft_rate) + " Hz clip");
  }
  const auto n = static_cast<std::size_t>(cfg.stft_window);
  const auto hop = static_cast<std::size_t>(cfg.stft_hop);
  if (clip.samples.size() < n) throw TooShortError("clip shorter than one STFT window");

  const std::size_t bins = n / 2 + 1;
  const std::size_t frames = 1 + (clip.samples.size() - n) / hop;
  const auto w = periodic_hann(n);

  // Twiddle tables, one row per output bin.
  std::vector<double> cos_t(bins * n);
  std::vector<double> sin_t(bins * n);
  for (std::size_t k = 0; k < bins; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = kTwoPi * static_cast<double>((k * i) % n) / static_cast<double>(n);
      cos_t[k * n + i] = std::cos(ang);
      sin_t[k * n + i] = std::sin(ang);
    }
  }

  Spectrogram s;
  s.values = Matrix(bins, frames);
  s.kind = TfrKind::stft;
  s.hop_samples = cfg.stft_hop;
  s.sample_rate = clip.sample_rate;
  s.frame_offset_samples = cfg.stft_window / 2;
  s.bin_freqs_hz.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    s.bin_freqs_hz[k] = static_cast<double>(k) * clip.sample_rate / static_cast<double>(n);
  }

  std::vector<double> xw(n);
  for (std::size_t m = 0; m < frames; ++m) {
    const double* x = clip.samples.data() + m * hop;
    for (std::size_t i = 0; i < n; ++i) xw[i] = w[i] * x[i];
    for (std::size_t k = 0; k < bins; ++k) {
      const double* c = cos_t.data() + k * n;
      const double* sn = sin_t.data() + k * n;
      double re = 0.0;
      double im = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        re += xw[i] * c[i];
        im += xw[i] * sn[i];
      }
      s.values(k, m) = std::hypot(re, im);
    }
  }
  return s;
}

double hz_to_mel(double hz) noexcept { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) noexcept { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(int n_filters, double fmin_hz, double fmax_hz) {
  const double lo = hz_to_mel(fmin_hz);
  const double hi = hz_to_mel(fmax_hz);
  std::vector<double> edges(static_cast<std::size_t>(n_filters) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (n_filters + 1.0));
  }
  return edges;
}

}  // namespace

std::vector<double> mel_center_freqs(int n_filters, double fmin_hz, double fmax_hz) {
  if (n_filters <= 0) throw ArgumentError("need at least one mel filter");
  const auto edges = mel_edges(n_filters, fmin_hz, fmax_hz);
  return {edges.begin() + 1, edges.end() - 1};
}

Matrix mel_filterbank(std::span<const double> bin_freqs_hz, int n_filters, double fmin_hz,
                      double fmax_hz) {
  if (n_filters <= 0) throw ArgumentError("need at least one mel filter");
  const auto edges = mel_edges(n_filters, fmin_hz, fmax_hz);
  Matrix fb(static_cast<std::size_t>(n_filters), bin_freqs_hz.size());
  for (std::size_t j = 0; j < fb.rows(); ++j) {
    const double lo = edges[j];
    const double mid = edges[j + 1];
    const double hi = edges[j + 2];
    double peak = 0.0;
    for (std::size_t b = 0; b < bin_freqs_hz.size(); ++b) {
      const double f = bin_freqs_hz[b];
      double v = 0.0;
      if (f > lo && f <= mid) {
        v = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        v = (hi - f) / (hi - mid);
      }
      fb(j, b) = v;
      peak = std::max(peak, v);
    }
    if (peak > 0.0) {
      for (double& v : fb.row(j)) v /= peak;
    }
  }
  return fb;
}

Spectrogram mel_spectrogram(const Spectrogram& stft, const TfrConfig& cfg) {
  if (stft.kind != TfrKind::stft) throw KindError("mel_spectrogram needs an STFT input");
  cfg.validate();
  const Matrix fb = mel_filterbank(stft.bin_freqs_hz, cfg.mel_filters, cfg.mel_fmin_hz,
                                   cfg.mel_fmax_hz);
  Spectrogram out;
  out.kind = TfrKind::mel;
  out.hop_samples = stft.hop_samples;
  out.sample_rate = stft.sample_rate;
  out.frame_offset_samples = stft.frame_offset_samples;
  out.bin_freqs_hz = mel_center_freqs(cfg.mel_filters, cfg.mel_fmin_hz, cfg.mel_fmax_hz);
  out.values = Matrix(fb.rows(), stft.frames());
  for (std::size_t j = 0; j < fb.rows(); ++j) {
    auto dst = out.values.row(j);
    for (std::size_t b = 0; b < fb.cols(); ++b) {
      const double w = fb(j, b);
      if (w == 0.0) continue;
      const auto src = stft.values.row(b);
      for (std::size_t m = 0; m < dst.size(); ++m) dst[m] += w * src[m];
    }
  }
  return out;
}

double cqt_q_factor(int bins_per_octave) noexcept {
  return 1.0 / (std::pow(2.0, 1.0 / bins_per_octave) - 1.0);
}

std::vector<double> cqt_frequencies(const TfrConfig& cfg) {
  std::vector<double> f(static_cast<std::size_t>(cfg.cqt_bins));
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = cfg.cqt_fmin_hz * std::pow(2.0, static_cast<double>(k) / cfg.cqt_bins_per_octave);
  }
  return f;
}

std::vector<std::size_t> cqt_kernel_lengths(const TfrConfig& cfg) {
  const double q = cqt_q_factor(cfg.cqt_bins_per_octave);
  const auto freqs = cqt_frequencies(cfg);
  std::vector<std::size_t> n(freqs.size());
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    n[k] = static_cast<std::size_t>(std::ceil(q * cfg.cqt_rate / freqs[k]));
  }
  return n;
}

Spectrogram cqt_magnitude(const AudioClip& clip, const TfrConfig& cfg) {
  cfg.validate();
  if (clip.sample_rate != cfg.cqt_rate) {
    throw ArgumentError("CQT expects a " + std::to_string(cfg.cqt_rate) + " Hz clip");
  }
  const auto freqs = cqt_frequencies(cfg);
  const auto lengths = cqt_kernel_lengths(cfg);
  const std::size_t longest = *std::max_element(lengths.begin(), lengths.end());
  if (clip.samples.size() < longest) throw TooShortError("clip shorter than the longest CQT kernel");

  const auto hop = static_cast<std::size_t>(cfg.cqt_hop);
  const std::size_t frames = 1 + clip.samples.size() / hop;
  const std::size_t pad = longest / 2 + 1;

  std::vector<double> padded(clip.samples.size() + 2 * pad + longest, 0.0);
  std::copy(clip.samples.begin(), clip.samples.end(), padded.begin() + static_cast<long>(pad));

  Spectrogram s;
  s.kind = TfrKind::cqt;
  s.hop_samples = cfg.cqt_hop;
  s.sample_rate = clip.sample_rate;
  s.frame_offset_samples = 0;
  s.bin_freqs_hz = freqs;
  s.values = Matrix(freqs.size(), frames);

  std::vector<double> kc;
  std::vector<double> ks;
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    const std::size_t len = lengths[k];
    const double half = static_cast<double>(len / 2);
    kc.assign(len, 0.0);
    ks.assign(len, 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double w =
          0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(len));
      const double ang = kTwoPi * freqs[k] * (static_cast<double>(i) - half) / clip.sample_rate;
      kc[i] = w * std::cos(ang);
      ks[i] = w * std::sin(ang);
      wsum += w;
    }
    for (std::size_t i = 0; i < len; ++i) {
      kc[i] /= wsum;
      ks[i] /= wsum;
    }
    auto out = s.values.row(k);
    for (std::size_t m = 0; m < frames; ++m) {
      // Kernel sample len/2 sits on the frame center m * hop.
      const double* x = padded.data() + pad + m * hop - len / 2;
      double re = 0.0;
      double im = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        re += x[i] * kc[i];
        im += x[i] * ks[i];
      }
      out[m] = std::hypot(re, im);
    }
  }
  return s;
}

}  // namespace snore
