#include "snore/audio_io.hpp"

#include "snore/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <sstream>

namespace snore {

const char* to_string(ClipLabel label) noexcept {
  switch (label) {
    case ClipLabel::snore: return "snore";
    case ClipLabel::interferer: return "interferer";
    case ClipLabel::mixture: return "mixture";
  }
  return "unknown";
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) noexcept {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) noexcept {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

double sinc(double x) noexcept {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double x, double beta) noexcept {
  // x in [-1, 1]
  if (x <= -1.0 || x >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / std::cyl_bessel_i(0.0, beta);
}

}  // namespace

AudioClip parse_wav(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw ParseError("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      // Tolerate a truncated trailing data chunk, as many writers leave the size stale.
      if (std::memcmp(chunk, "data", 4) != 0) throw ParseError("chunk overruns file");
    }
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw ParseError("fmt chunk too short");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (avail < 26) throw ParseError("extensible fmt chunk too short");
        format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = avail;
    }
    pos = body + len + (len & 1u);
  }

  if (!have_fmt) throw ParseError("missing fmt chunk");
  if (data == nullptr) throw ParseError("missing data chunk");
  if (rate == 0) throw ParseError("zero sample rate");
  if (channels != 1 && channels != 2) {
    throw UnsupportedFormatError("only mono and stereo files are supported");
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    std::ostringstream msg;
    msg << "unsupported WAV encoding (format " << format << ", " << bits << " bits)";
    throw UnsupportedFormatError(msg.str());
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_len / frame_bytes;
  if (frames == 0) throw ParseError("empty data chunk");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + i * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        const std::uint32_t raw = read_u32(p);
        float f;
        std::memcpy(&f, &raw, sizeof f);
        acc += f;
      }
    }
    clip.samples[i] = acc / channels;
  }
  return clip;
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  AudioClip clip = parse_wav(bytes);
  clip.source_tag = path.filename().string();
  return clip;
}

void save_wav(const std::filesystem::path& path, const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw ArgumentError("sample rate must be positive");
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * n);
  put_tag(out, "RIFF");
  put_u32(out, 36 + 2 * n);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, 2 * n);
  for (double s : clip.samples) {
    const double scaled = std::round(s * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ArgumentError("target rate must be positive");
  if (clip.sample_rate <= 0) throw ArgumentError("source rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const long g = std::gcd(clip.sample_rate, target_rate);
  const long up = target_rate / g;    // L
  const long down = clip.sample_rate / g;  // M

  // Cutoff relative to the input Nyquist; 0.9 leaves room for the transition band.
  constexpr double kRolloff = 0.9;
  constexpr int kZeroCrossings = 64;
  constexpr double kBeta = 7.857;  // Kaiser beta for ~80 dB stop-band
  const double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down)) * kRolloff;
  const double half_width = kZeroCrossings / cutoff;  // in input samples
  const long taps_half = static_cast<long>(std::ceil(half_width));

  // One tap table per output phase; phase = (j * down) mod up.
  const long taps = 2 * taps_half + 1;
  std::vector<std::vector<double>> table(static_cast<std::size_t>(up), std::vector<double>(taps));
  for (long ph = 0; ph < up; ++ph) {
    const double frac = static_cast<double>(ph) / static_cast<double>(up);
    double sum = 0.0;
    for (long t = 0; t < taps; ++t) {
      const double tau = frac - static_cast<double>(t - taps_half);  // position minus input index
      const double v = cutoff * sinc(cutoff * tau) * kaiser(tau / half_width, kBeta);
      table[ph][t] = v;
      sum += v;
    }
    for (double& v : table[ph]) v /= sum;
  }

  const auto in_len = static_cast<long>(clip.samples.size());
  const auto out_len = static_cast<long>(std::llround(static_cast<double>(in_len) * up / down));
  AudioClip out = clip;
  out.sample_rate = target_rate;
  out.samples.assign(static_cast<std::size_t>(std::max<long>(out_len, 0)), 0.0);
  for (long j = 0; j < out_len; ++j) {
    const long num = j * down;
    const long base = num / up;
    const long ph = num % up;
    const auto& h = table[ph];
    double acc = 0.0;
    const long first = base - taps_half;
    const long t0 = std::max<long>(0, -first);
    const long t1 = std::min<long>(taps, in_len - first);
    for (long t = t0; t < t1; ++t) acc += h[t] * clip.samples[first + t];
    out.samples[j] = acc;
  }
  return out;
}

AudioClip fix_duration(const AudioClip& clip, double seconds) {
  if (!(seconds > 0.0)) throw ArgumentError("duration must be positive");
  if (clip.sample_rate <= 0) throw ArgumentError("sample rate must be positive");
  const auto n = static_cast<std::size_t>(std::llround(seconds * clip.sample_rate));
  AudioClip out = clip;
  out.samples.resize(n, 0.0);
  return out;
}

double rms(const std::vector<double>& x) noexcept {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double mix_gain(const AudioClip& signal, const AudioClip& noise, const MixSpec& spec) {
  if (!std::isfinite(spec.snr_db)) throw ArgumentError("SNR must be finite");
  if (signal.sample_rate != noise.sample_rate) throw MismatchError("sample rates differ");
  if (signal.samples.size() != noise.samples.size()) throw MismatchError("lengths differ");
  const double noise_rms = rms(noise.samples);
  if (!(noise_rms > 0.0)) throw DegenerateError("noise has zero RMS");
  return rms(signal.samples) / noise_rms * std::pow(10.0, -spec.snr_db / 20.0);
}

AudioClip mix_at_snr(const AudioClip& signal, const AudioClip& noise, const MixSpec& spec) {
  const double g = mix_gain(signal, noise, spec);
  AudioClip out = signal;
  out.label = ClipLabel::mixture;
  double peak = 0.0;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] += g * noise.samples[i];
    peak = std::max(peak, std::abs(out.samples[i]));
  }
  std::ostringstream tag;
  tag << signal.source_tag << "+" << noise.source_tag << "@" << spec.snr_db << "dB";
  if (peak > 1.0) {
    const double scale = 1.0 / peak;
    for (double& v : out.samples) v *= scale;
    tag.precision(17);
    tag << ";peak_scale=" << scale;
  }
  out.source_tag = tag.str();
  return out;
}

}  // namespace snore
