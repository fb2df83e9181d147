#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace snore {

enum class ClipLabel { snore, interferer, mixture };

const char* to_string(ClipLabel label) noexcept;

/// Mono sample buffer with its rate and provenance.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string subject_id;
  ClipLabel label = ClipLabel::snore;
  std::string source_tag;

  double duration_s() const noexcept {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Target SNR for mix_at_snr, in decibels.
struct MixSpec {
  double snr_db = 0.0;
};

/// Canonical clip duration used throughout the corpus.
inline constexpr double kClipSeconds = 3.5;

/// Reads a RIFF/WAVE file (PCM16 or float32, mono or stereo). Stereo is
/// averaged to mono.
AudioClip load_wav(const std::filesystem::path& path);

/// Writes mono PCM16. Samples are clamped to [-1, 1) before quantization.
void save_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Parses an in-memory RIFF/WAVE image; load_wav is a thin wrapper.
AudioClip parse_wav(const std::vector<unsigned char>& bytes);

/// Band-limited rational rate conversion (Kaiser-windowed sinc).
AudioClip resample(const AudioClip& clip, int target_rate);

/// Right-pads with zeros or truncates (keeping the head) to round(seconds * rate).
AudioClip fix_duration(const AudioClip& clip, double seconds = kClipSeconds);

double rms(const std::vector<double>& x) noexcept;

/// Gain applied to `noise` so that rms(signal) / rms(gain * noise) hits the SNR.
double mix_gain(const AudioClip& signal, const AudioClip& noise, const MixSpec& spec);

/// signal + gain * noise. Mixtures whose peak exceeds 1 are rescaled by 1/peak
/// and the factor is appended to source_tag as "peak_scale=<v>".
AudioClip mix_at_snr(const AudioClip& signal, const AudioClip& noise, const MixSpec& spec);

}  // namespace snore
