#pragma once

#include "snore/audio_io.hpp"
#include "snore/matrix.hpp"

#include <complex>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace snore {

enum class TfrKind { stft, mel, cqt, harmonic };

const char* to_string(TfrKind kind) noexcept;
std::optional<TfrKind> parse_tfr_kind(std::string_view text) noexcept;

/// Magnitude time-frequency representation: values(k, m) for bin k, frame m.
struct Spectrogram {
  Matrix values;
  std::vector<double> bin_freqs_hz;
  int hop_samples = 1;
  int sample_rate = 1;
  /// Sample index of frame 0's center; frame m is centered at offset + m * hop.
  int frame_offset_samples = 0;
  TfrKind kind = TfrKind::stft;

  std::size_t bins() const noexcept { return values.rows(); }
  std::size_t frames() const noexcept { return values.cols(); }
  double frame_time_s(std::size_t m) const noexcept {
    return (frame_offset_samples + static_cast<double>(m) * hop_samples) / sample_rate;
  }
};

struct TfrConfig {
  int stft_window = 256;
  int stft_hop = 64;
  int stft_rate = 8000;
  int mel_filters = 32;
  double mel_fmin_hz = 0.0;
  double mel_fmax_hz = 4000.0;
  int cqt_bins = 84;
  int cqt_bins_per_octave = 12;
  int cqt_hop = 512;
  int cqt_rate = 48000;
  double cqt_fmin_hz = 32.70;

  /// Throws ArgumentError when a count is non-positive or the top CQT bin
  /// reaches Nyquist.
  void validate() const;
};

/// Periodic Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / N).
std::vector<double> periodic_hann(std::size_t n);

/// One-sided DFT (bins 0..N/2) of one Hann-windowed frame of length N.
std::vector<std::complex<double>> windowed_dft(std::span<const double> frame);

Spectrogram stft_magnitude(const AudioClip& clip, const TfrConfig& cfg = {});

double hz_to_mel(double hz) noexcept;
double mel_to_hz(double mel) noexcept;

/// Triangular HTK-mel filterbank sampled at `bin_freqs_hz`; one row per filter.
/// Each row is scaled so its largest sampled weight is exactly 1.
Matrix mel_filterbank(std::span<const double> bin_freqs_hz, int n_filters, double fmin_hz,
                      double fmax_hz);

/// Center frequencies of the mel filters (strictly increasing).
std::vector<double> mel_center_freqs(int n_filters, double fmin_hz, double fmax_hz);

Spectrogram mel_spectrogram(const Spectrogram& stft, const TfrConfig& cfg = {});

/// f_k = fmin * 2^(k / bins_per_octave).
std::vector<double> cqt_frequencies(const TfrConfig& cfg = {});

/// Q = 1 / (2^(1/bpo) - 1).
double cqt_q_factor(int bins_per_octave) noexcept;

/// Kernel length ceil(Q * rate / f_k) for each bin.
std::vector<std::size_t> cqt_kernel_lengths(const TfrConfig& cfg = {});

Spectrogram cqt_magnitude(const AudioClip& clip, const TfrConfig& cfg = {});

}  // namespace snore
