#pragma once

#include "snore/audio_io.hpp"
#include "snore/matrix.hpp"
#include "snore/tfr.hpp"

#include <optional>
#include <span>
#include <vector>

namespace snore {

/// Median-filter HPSS settings. Lengths are in frames (time) or bins (frequency).
struct HpssConfig {
  int harmonic_length = 33;
  double mask_power = 2.0;
  /// Derive per-bin percussive lengths from the one-sixteenth bandwidth rule.
  bool sixteenth_rule = true;
  /// Fixed percussive length for every bin; bypasses the rule when set.
  std::optional<int> percussive_length_fixed;
  int percussive_length_min = 3;

  void validate() const;
};

/// Intermediates of one separation: filtered spectrograms, harmonic mask,
/// harmonic-enhanced spectrogram and the per-bin percussive lengths used.
struct HpssResult {
  Spectrogram harmonic;
  Spectrogram percussive;
  Matrix mask;
  Spectrogram enhanced;
  std::vector<int> percussive_lengths;
};

/// Per-bin odd percussive-filter lengths. Bin k gets the smallest odd n >= the
/// configured floor whose n-bin span around f_k covers at least f_k / 16,
/// using the local frequency ratio f_{k+1} / f_k (the last bin reuses the
/// previous ratio).
std::vector<int> percussive_kernel_lengths(std::span<const double> bin_freqs_hz,
                                           const HpssConfig& cfg = {});

/// Median over time: window of `length` frames centered on each cell, truncated
/// at the matrix edges. Even-count windows average the two middle values.
Spectrogram median_filter_time(const Spectrogram& x, int length);

/// Median over frequency with a per-output-bin window length.
Spectrogram median_filter_freq(const Spectrogram& x, std::span<const int> lengths);

/// Soft mask H^p / (H^p + P^p); cells with a zero denominator get 0.
Matrix wiener_mask(const Spectrogram& harmonic, const Spectrogram& percussive, double power);

/// Elementwise mask * X, tagged as the harmonic kind.
Spectrogram harmonic_enhance(const Spectrogram& x, const Matrix& mask);

/// Separation of an existing CQT magnitude spectrogram.
HpssResult hpss_separate(const Spectrogram& cqt, const HpssConfig& cfg = {});

/// Resample to the CQT rate, take the CQT and separate it.
HpssResult hpss_pipeline(const AudioClip& clip, const TfrConfig& tfr_cfg = {},
                         const HpssConfig& hpss_cfg = {});

}  // namespace snore
