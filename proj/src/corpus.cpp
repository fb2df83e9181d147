#include "snore/corpus.hpp"

#include "snore/errors.hpp"
#include "snore/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace snore {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double raised_cosine_gate(std::size_t i, std::size_t len, std::size_t attack, std::size_t decay) {
  if (attack > 0 && i < attack) {
    return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(attack));
  }
  if (decay > 0 && i + decay >= len) {
    const double r = static_cast<double>(len - 1 - i) / static_cast<double>(decay);
    return 0.5 - 0.5 * std::cos(std::numbers::pi * std::clamp(r, 0.0, 1.0));
  }
  return 1.0;
}

void scale_to_rms(std::vector<double>& x, double target) {
  const double r = rms(x);
  if (r > 0.0) {
    const double g = target / r;
    for (double& v : x) v *= g;
  }
}

std::size_t clip_length(double seconds, int rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

}  // namespace

void SnoreSynthParams::validate() const {
  if (sample_rate <= 0) throw ArgumentError("sample rate must be positive");
  if (n_harmonics < 1) throw ArgumentError("need at least one harmonic");
  if (f0_hz * n_harmonics >= sample_rate / 2.0) {
    throw AliasingError("highest harmonic reaches Nyquist");
  }
  if (!(f0_hz >= 50.0 && f0_hz <= 250.0)) throw ArgumentError("f0 must lie in [50, 250] Hz");
  if (!(duration_s >= 0.3 && duration_s <= 3.0)) throw ArgumentError("duration must lie in [0.3, 3.0] s");
  if (!(clip_seconds >= duration_s)) throw ArgumentError("clip shorter than the event");
  if (attack_s < 0.0 || decay_s < 0.0 || attack_s + decay_s > duration_s) {
    throw ArgumentError("attack and decay must fit inside the event");
  }
  if (jitter_pct < 0.0 || breath_noise < 0.0 || !(peak > 0.0)) {
    throw ArgumentError("jitter, breath noise and peak must be non-negative");
  }
}

void InterfererParams::validate() const {
  if (sample_rate <= 0 || !(clip_seconds > 0.0)) throw ArgumentError("bad interferer clip geometry");
  if (!(rms_target > 0.0)) throw ArgumentError("interferer RMS target must be positive");
  if (!(click_period_s > click_width_s) || !(click_width_s > 0.0)) {
    throw ArgumentError("click period must exceed click width");
  }
  if (!(burst_duration_s > 0.0) || burst_duration_s > clip_seconds) {
    throw ArgumentError("burst must fit in the clip");
  }
  if (!(cough_decay_s > 0.0) || cough_events < 1) throw ArgumentError("bad cough settings");
}

const char* to_string(InterfererKind kind) noexcept {
  switch (kind) {
    case InterfererKind::click_train: return "click_train";
    case InterfererKind::white_burst: return "white_burst";
    case InterfererKind::pink_burst: return "pink_burst";
    case InterfererKind::cough_surrogate: return "cough_surrogate";
  }
  return "unknown";
}

std::optional<InterfererKind> parse_interferer_kind(std::string_view text) noexcept {
  for (auto k : {InterfererKind::click_train, InterfererKind::white_burst, InterfererKind::pink_burst,
                 InterfererKind::cough_surrogate}) {
    if (text == to_string(k)) return k;
  }
  return std::nullopt;
}

const char* to_string(ItemClass c) noexcept {
  return c == ItemClass::snore_mixture ? "snore_mixture" : "interferer";
}

const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "unknown";
}

AudioClip synth_snore(const SnoreSynthParams& p, std::uint64_t seed) {
  p.validate();
  Rng rng(seed);
  const std::size_t total = clip_length(p.clip_seconds, p.sample_rate);
  const std::size_t len = std::min(total, clip_length(p.duration_s, p.sample_rate));
  const std::size_t onset = static_cast<std::size_t>(rng.below(total - len + 1));

  // Slow f0 wander: mean of three low-rate sinusoids, bounded by 1.
  std::array<double, 3> rate{};
  std::array<double, 3> phase{};
  for (std::size_t i = 0; i < rate.size(); ++i) {
    rate[i] = rng.uniform(0.5, 4.0);
    phase[i] = rng.uniform(0.0, kTwoPi);
  }
  const double depth = p.jitter_pct / 100.0;
  const double dt = 1.0 / p.sample_rate;
  const auto attack = clip_length(p.attack_s, p.sample_rate);
  const auto decay = clip_length(p.decay_s, p.sample_rate);

  std::vector<double> amp(static_cast<std::size_t>(p.n_harmonics));
  for (int h = 1; h <= p.n_harmonics; ++h) amp[h - 1] = 1.0 / std::pow(h, p.harmonic_rolloff);

  std::vector<double> event(len);
  double theta = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) * dt;
    double wander = 0.0;
    if (depth > 0.0) {
      for (std::size_t c = 0; c < rate.size(); ++c) wander += std::sin(kTwoPi * rate[c] * t + phase[c]);
      wander /= static_cast<double>(rate.size());
    }
    double v = 0.0;
    for (int h = 1; h <= p.n_harmonics; ++h) v += amp[h - 1] * std::sin(h * theta);
    event[i] = v * raised_cosine_gate(i, len, attack, decay);
    theta += kTwoPi * p.f0_hz * (1.0 + depth * wander) * dt;
    if (theta > kTwoPi * 1e6) theta = std::fmod(theta, kTwoPi);
  }
  if (p.breath_noise > 0.0) {
    const double level = p.breath_noise * rms(event);
    for (std::size_t i = 0; i < len; ++i) {
      event[i] += level * rng.normal() * raised_cosine_gate(i, len, attack, decay);
    }
  }
  double peak = 0.0;
  for (double v : event) peak = std::max(peak, std::abs(v));

  AudioClip clip;
  clip.sample_rate = p.sample_rate;
  clip.label = ClipLabel::snore;
  clip.samples.assign(total, 0.0);
  const double g = peak > 0.0 ? p.peak / peak : 0.0;
  for (std::size_t i = 0; i < len; ++i) clip.samples[onset + i] = g * event[i];
  std::ostringstream tag;
  tag << "snore(f0=" << p.f0_hz << ",seed=" << seed << ")";
  clip.source_tag = tag.str();
  return clip;
}

AudioClip synth_interferer(InterfererKind kind, std::uint64_t seed, const InterfererParams& p) {
  p.validate();
  Rng rng(seed);
  const std::size_t total = clip_length(p.clip_seconds, p.sample_rate);
  std::vector<double> x(total, 0.0);

  switch (kind) {
    case InterfererKind::click_train: {
      const std::size_t width = std::max<std::size_t>(1, clip_length(p.click_width_s, p.sample_rate));
      const double offset = rng.uniform(0.0, p.click_period_s - p.click_width_s);
      const double tau = static_cast<double>(width) / 4.0;
      for (int i = 0;; ++i) {
        const auto start = clip_length(offset + i * p.click_period_s, p.sample_rate);
        if (start + width > total) break;
        for (std::size_t n = 0; n < width; ++n) {
          x[start + n] = rng.normal() * std::exp(-static_cast<double>(n) / tau);
        }
      }
      break;
    }
    case InterfererKind::white_burst:
    case InterfererKind::pink_burst: {
      const std::size_t len = clip_length(p.burst_duration_s, p.sample_rate);
      const std::size_t onset = static_cast<std::size_t>(rng.below(total - len + 1));
      const std::size_t edge = std::min(len / 2, clip_length(0.02, p.sample_rate));
      // Paul Kellet's economy pink filter state.
      double b0 = 0.0, b1 = 0.0, b2 = 0.0;
      for (std::size_t n = 0; n < len; ++n) {
        double v = rng.normal();
        if (kind == InterfererKind::pink_burst) {
          b0 = 0.99765 * b0 + v * 0.0990460;
          b1 = 0.96300 * b1 + v * 0.2965164;
          b2 = 0.57000 * b2 + v * 1.0526913;
          v = b0 + b1 + b2 + v * 0.1848;
        }
        x[onset + n] = v * raised_cosine_gate(n, len, edge, edge);
      }
      break;
    }
    case InterfererKind::cough_surrogate: {
      const std::size_t len = std::min(total, clip_length(6.0 * p.cough_decay_s, p.sample_rate));
      const std::size_t attack = clip_length(0.005, p.sample_rate);
      for (int e = 0; e < p.cough_events; ++e) {
        const std::size_t onset = static_cast<std::size_t>(rng.below(total - len + 1));
        // One-pole low-pass gives the pitch-less downward spectral tilt.
        const double pole = rng.uniform(0.3, 0.8);
        const double tau = p.cough_decay_s * rng.uniform(0.7, 1.3) * p.sample_rate;
        const double gain = rng.uniform(0.5, 1.0);
        double state = 0.0;
        for (std::size_t n = 0; n < len; ++n) {
          state = pole * state + (1.0 - pole) * rng.normal();
          const double env = n < attack ? static_cast<double>(n) / static_cast<double>(attack)
                                        : std::exp(-static_cast<double>(n - attack) / tau);
          x[onset + n] += gain * env * state;
        }
      }
      break;
    }
  }
  scale_to_rms(x, p.rms_target);

  AudioClip clip;
  clip.sample_rate = p.sample_rate;
  clip.label = ClipLabel::interferer;
  clip.samples = std::move(x);
  std::ostringstream tag;
  tag << to_string(kind) << "(seed=" << seed << ")";
  clip.source_tag = tag.str();
  return clip;
}

double duration_histogram(std::span<const double> durations_s, double coverage) {
  if (durations_s.empty()) throw ArgumentError("no durations given");
  if (!(coverage > 0.0 && coverage <= 1.0)) throw ArgumentError("coverage must lie in (0, 1]");
  std::vector<double> s(durations_s.begin(), durations_s.end());
  std::sort(s.begin(), s.end());
  // Guard the product against representation error (0.97 * 100 = 97.000...01).
  const double want = coverage * static_cast<double>(s.size());
  auto rank = static_cast<std::size_t>(std::ceil(want - 1e-9 * want));
  rank = std::clamp<std::size_t>(rank, 1, s.size());
  return s[rank - 1];
}

void ManifestParams::validate() const {
  if (n_snore < 1 || n_interferer < 1) throw ArgumentError("corpus counts must be positive");
  if (snr_list.empty()) throw ArgumentError("need at least one SNR");
  for (double s : snr_list) {
    if (!std::isfinite(s)) throw ArgumentError("SNR must be finite");
  }
  if (n_folds < 2) throw ArgumentError("need at least two folds");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ArgumentError("test fraction must lie in (0, 1)");
  if (n_subjects < 2) throw ArgumentError("need at least two subjects");
  if (interferer_kinds.empty()) throw ArgumentError("need at least one interferer kind");
  if (!(level_max_db >= level_min_db)) throw ArgumentError("level range is inverted");
  if (!(f0_max_hz >= f0_min_hz) || harmonics_max < harmonics_min || harmonics_min < 1 ||
      !(rolloff_max >= rolloff_min) || !(duration_max_s >= duration_min_s)) {
    throw ArgumentError("synthesis ranges are inverted");
  }
}

std::size_t CorpusManifest::count(ItemClass c) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [&](const CorpusItem& i) { return i.item_class == c; }));
}

std::size_t CorpusManifest::count(ItemClass c, Split s) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      items.begin(), items.end(), [&](const CorpusItem& i) { return i.item_class == c && i.split == s; }));
}

std::vector<std::string> CorpusManifest::subjects(Split s) const {
  std::set<std::string> out;
  for (const auto& i : items) {
    if (i.split == s) out.insert(i.subject);
  }
  return {out.begin(), out.end()};
}

std::vector<std::string> CorpusManifest::non_test_subjects() const {
  std::set<std::string> out;
  for (const auto& i : items) {
    if (i.split != Split::test) out.insert(i.subject);
  }
  return {out.begin(), out.end()};
}

namespace {

std::string numbered(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05d", prefix, i);
  return buf;
}

std::string snr_suffix(double snr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_snr%+g", snr);
  return buf;
}

struct SubjectTimbre {
  double f0_base;
  double rolloff;
  int n_harmonics;
};

}  // namespace

CorpusManifest build_manifest(const ManifestParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);

  const int n_test_subjects =
      std::max(1, static_cast<int>(std::lround(params.test_fraction * params.n_subjects)));
  if (params.n_subjects - n_test_subjects < params.n_folds) {
    throw ArgumentError("too few subjects for the requested folds");
  }

  std::vector<std::string> subjects;
  std::vector<SubjectTimbre> timbre;
  for (int s = 0; s < params.n_subjects; ++s) {
    subjects.push_back(numbered("subj", s));
    const double lf = rng.uniform(std::log(params.f0_min_hz), std::log(params.f0_max_hz));
    timbre.push_back({std::exp(lf), rng.uniform(params.rolloff_min, params.rolloff_max),
                      params.harmonics_min +
                          static_cast<int>(rng.below(
                              static_cast<std::uint64_t>(params.harmonics_max - params.harmonics_min + 1)))});
  }
  std::vector<int> subject_order(subjects.size());
  for (std::size_t i = 0; i < subject_order.size(); ++i) subject_order[i] = static_cast<int>(i);
  rng.shuffle(subject_order.begin(), subject_order.end());
  std::set<std::string> test_subjects;
  for (int i = 0; i < n_test_subjects; ++i) test_subjects.insert(subjects[subject_order[i]]);

  // Interferer pool: unmixed items take the head, mixtures draw from the tail.
  const int pool_size = params.interferer_pool.value_or(params.n_snore + params.n_interferer);
  if (pool_size - params.n_interferer < params.n_snore) {
    throw PoolExhaustedError("interferer pool too small to keep mixing and unmixed sets disjoint");
  }
  std::vector<InterfererRecipe> pool(static_cast<std::size_t>(pool_size));
  for (int i = 0; i < pool_size; ++i) {
    auto& r = pool[static_cast<std::size_t>(i)];
    r.kind = params.interferer_kinds[static_cast<std::size_t>(i) % params.interferer_kinds.size()];
    r.seed = child_seed(seed, hash_tag(numbered("pool", i)));
    r.params = params.interferer_defaults;
    r.params.sample_rate = params.sample_rate;
    r.params.clip_seconds = params.clip_seconds;
  }
  rng.shuffle(pool.begin(), pool.end());

  CorpusManifest m;
  m.seed = seed;
  m.params = params;

  const auto split_of = [&](const std::string& subj) {
    return test_subjects.count(subj) ? Split::test : Split::train;
  };

  for (int j = 0; j < params.n_snore; ++j) {
    const auto sidx = static_cast<std::size_t>(j % params.n_subjects);
    const auto& tb = timbre[sidx];
    SnoreRecipe snore;
    snore.seed = child_seed(seed, hash_tag(numbered("snore", j)));
    auto& sp = snore.params;
    sp.sample_rate = params.sample_rate;
    sp.clip_seconds = params.clip_seconds;
    sp.f0_hz = std::clamp(tb.f0_base * std::pow(2.0, rng.uniform(-1.0 / 12.0, 1.0 / 12.0)), 50.0, 250.0);
    sp.n_harmonics = tb.n_harmonics;
    sp.harmonic_rolloff = tb.rolloff;
    sp.duration_s = rng.uniform(params.duration_min_s, params.duration_max_s);
    sp.attack_s = std::min(rng.uniform(0.03, 0.1), sp.duration_s / 3.0);
    sp.decay_s = std::min(rng.uniform(0.1, 0.3), sp.duration_s / 3.0);
    sp.jitter_pct = params.jitter_pct;
    sp.breath_noise = params.breath_noise;
    const auto& partner = pool[static_cast<std::size_t>(params.n_interferer + j)];
    for (double snr : params.snr_list) {
      CorpusItem item;
      item.id = numbered("mix", j) + snr_suffix(snr);
      item.item_class = ItemClass::snore_mixture;
      item.subject = subjects[sidx];
      item.snr_db = snr;
      item.split = split_of(item.subject);
      item.snore = snore;
      item.interferer = partner;
      item.level_db = rng.uniform(params.level_min_db, params.level_max_db);
      m.items.push_back(std::move(item));
    }
  }
  for (int k = 0; k < params.n_interferer; ++k) {
    CorpusItem item;
    item.id = numbered("int", k);
    item.item_class = ItemClass::interferer;
    item.subject = subjects[static_cast<std::size_t>(k % params.n_subjects)];
    item.split = split_of(item.subject);
    item.interferer = pool[static_cast<std::size_t>(k)];
    item.level_db = rng.uniform(params.level_min_db, params.level_max_db);
    m.items.push_back(std::move(item));
  }
  return assign_folds(m, params.n_folds, seed);
}

std::vector<FoldSplit> kfold_subject_splits(const CorpusManifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("need at least two folds");
  auto subjects = manifest.non_test_subjects();
  if (subjects.size() < static_cast<std::size_t>(k)) {
    throw ArgumentError("fewer non-test subjects than folds");
  }
  Rng rng(child_seed(seed, hash_tag("folds")));
  rng.shuffle(subjects.begin(), subjects.end());
  std::map<std::string, int> group;
  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const int g = static_cast<int>(i % static_cast<std::size_t>(k));
    group[subjects[i]] = g;
    folds[static_cast<std::size_t>(g)].validation_subjects.push_back(subjects[i]);
  }
  for (auto& f : folds) std::sort(f.validation_subjects.begin(), f.validation_subjects.end());
  for (std::size_t idx = 0; idx < manifest.items.size(); ++idx) {
    const auto& item = manifest.items[idx];
    if (item.split == Split::test) continue;
    const int g = group.at(item.subject);
    for (int f = 0; f < k; ++f) {
      (f == g ? folds[static_cast<std::size_t>(f)].validation : folds[static_cast<std::size_t>(f)].train)
          .push_back(idx);
    }
  }
  return folds;
}

CorpusManifest assign_folds(const CorpusManifest& manifest, int k, std::uint64_t seed) {
  const auto folds = kfold_subject_splits(manifest, k, seed);
  CorpusManifest out = manifest;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t idx : folds[f].validation) {
      out.items[idx].fold = static_cast<int>(f);
      out.items[idx].split = Split::train;
    }
  }
  return out;
}

CorpusManifest subsample_limited(const CorpusManifest& manifest, std::size_t n_snore_train,
                                 std::size_t n_interferer_train, std::uint64_t seed) {
  std::vector<std::size_t> snores;
  std::vector<std::size_t> interferers;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    const auto& item = manifest.items[i];
    if (item.split == Split::test) continue;
    (item.item_class == ItemClass::snore_mixture ? snores : interferers).push_back(i);
  }
  if (n_snore_train > snores.size() || n_interferer_train > interferers.size()) {
    throw ArgumentError("requested more training items than available");
  }
  Rng rng(child_seed(seed, hash_tag("subsample")));
  rng.shuffle(snores.begin(), snores.end());
  rng.shuffle(interferers.begin(), interferers.end());
  std::vector<bool> keep(manifest.items.size(), false);
  for (std::size_t i = 0; i < n_snore_train; ++i) keep[snores[i]] = true;
  for (std::size_t i = 0; i < n_interferer_train; ++i) keep[interferers[i]] = true;

  CorpusManifest out = manifest;
  out.items.clear();
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    if (manifest.items[i].split == Split::test || keep[i]) out.items.push_back(manifest.items[i]);
  }
  return out;
}

void check_manifest(const CorpusManifest& manifest) {
  std::set<std::string> test;
  std::set<std::string> other;
  std::map<std::string, std::optional<int>> fold_of;
  for (const auto& item : manifest.items) {
    if (item.item_class == ItemClass::snore_mixture && !item.snr_db) {
      throw InvariantViolation("mixture " + item.id + " has no SNR");
    }
    if (item.split == Split::test) {
      test.insert(item.subject);
      if (item.fold) throw InvariantViolation("test item " + item.id + " carries a fold");
      continue;
    }
    other.insert(item.subject);
    if (item.fold && (*item.fold < 0 || *item.fold >= manifest.params.n_folds)) {
      throw InvariantViolation("item " + item.id + " has an out-of-range fold");
    }
    auto [it, fresh] = fold_of.emplace(item.subject, item.fold);
    if (!fresh && it->second != item.fold) {
      throw InvariantViolation("subject " + item.subject + " spans several folds");
    }
  }
  for (const auto& s : test) {
    if (other.count(s)) throw InvariantViolation("subject " + s + " appears in test and training data");
  }
}

namespace {

AudioClip load_source(const std::string& path, int rate, double seconds) {
  return fix_duration(resample(load_wav(path), rate), seconds);
}

AudioClip render_interferer(const CorpusItem& item, const ManifestParams& params) {
  if (item.interferer.wav_path) {
    return load_source(*item.interferer.wav_path, params.sample_rate, params.clip_seconds);
  }
  return fix_duration(synth_interferer(item.interferer.kind, item.interferer.seed, item.interferer.params),
                      params.clip_seconds);
}

AudioClip render_snore(const CorpusItem& item, const ManifestParams& params) {
  const auto& s = *item.snore;
  if (s.wav_path) return load_source(*s.wav_path, params.sample_rate, params.clip_seconds);
  return fix_duration(synth_snore(s.params, s.seed), params.clip_seconds);
}

}  // namespace

AudioClip render_item(const CorpusItem& item, const ManifestParams& params) {
  AudioClip clip;
  if (item.item_class == ItemClass::snore_mixture) {
    if (!item.snore || !item.snr_db) throw ArgumentError("mixture " + item.id + " lacks a snore recipe or SNR");
    clip = mix_at_snr(render_snore(item, params), render_interferer(item, params), MixSpec{*item.snr_db});
  } else {
    clip = render_interferer(item, params);
  }
  const double g = std::pow(10.0, item.level_db / 20.0);
  for (double& v : clip.samples) v *= g;
  clip.subject_id = item.subject;
  clip.source_tag = item.id;
  return clip;
}

double measured_snr_db(const CorpusItem& item, const ManifestParams& params) {
  if (item.item_class != ItemClass::snore_mixture || !item.snore || !item.snr_db) {
    throw ArgumentError("item " + item.id + " is not a mixture");
  }
  const auto snore = render_snore(item, params);
  const auto noise = render_interferer(item, params);
  const double g = mix_gain(snore, noise, MixSpec{*item.snr_db});
  return 20.0 * std::log10(rms(snore.samples) / (g * rms(noise.samples)));
}

// ---- JSON-lines persistence ----

namespace {

json to_json(const SnoreSynthParams& p) {
  return {{"f0_hz", p.f0_hz},         {"n_harmonics", p.n_harmonics}, {"harmonic_rolloff", p.harmonic_rolloff},
          {"duration_s", p.duration_s}, {"jitter_pct", p.jitter_pct},   {"attack_s", p.attack_s},
          {"decay_s", p.decay_s},     {"breath_noise", p.breath_noise}, {"sample_rate", p.sample_rate},
          {"clip_seconds", p.clip_seconds}, {"peak", p.peak}};
}

SnoreSynthParams snore_params_from(const json& j) {
  SnoreSynthParams p;
  p.f0_hz = j.at("f0_hz").get<double>();
  p.n_harmonics = j.at("n_harmonics").get<int>();
  p.harmonic_rolloff = j.at("harmonic_rolloff").get<double>();
  p.duration_s = j.at("duration_s").get<double>();
  p.jitter_pct = j.at("jitter_pct").get<double>();
  p.attack_s = j.at("attack_s").get<double>();
  p.decay_s = j.at("decay_s").get<double>();
  p.breath_noise = j.value("breath_noise", 0.0);
  p.sample_rate = j.at("sample_rate").get<int>();
  p.clip_seconds = j.at("clip_seconds").get<double>();
  p.peak = j.at("peak").get<double>();
  return p;
}

json to_json(const InterfererParams& p) {
  return {{"sample_rate", p.sample_rate},       {"clip_seconds", p.clip_seconds},
          {"rms_target", p.rms_target},         {"click_period_s", p.click_period_s},
          {"click_width_s", p.click_width_s},   {"burst_duration_s", p.burst_duration_s},
          {"cough_decay_s", p.cough_decay_s},   {"cough_events", p.cough_events}};
}

InterfererParams interferer_params_from(const json& j) {
  InterfererParams p;
  p.sample_rate = j.at("sample_rate").get<int>();
  p.clip_seconds = j.at("clip_seconds").get<double>();
  p.rms_target = j.at("rms_target").get<double>();
  p.click_period_s = j.at("click_period_s").get<double>();
  p.click_width_s = j.at("click_width_s").get<double>();
  p.burst_duration_s = j.at("burst_duration_s").get<double>();
  p.cough_decay_s = j.at("cough_decay_s").get<double>();
  p.cough_events = j.at("cough_events").get<int>();
  return p;
}

json to_json(const InterfererRecipe& r) {
  json j{{"kind", to_string(r.kind)}, {"seed", r.seed}, {"params", to_json(r.params)}};
  if (r.wav_path) j["wav_path"] = *r.wav_path;
  return j;
}

InterfererRecipe interferer_recipe_from(const json& j) {
  InterfererRecipe r;
  const auto kind = parse_interferer_kind(j.at("kind").get<std::string>());
  if (!kind) throw ParseError("unknown interferer kind in manifest");
  r.kind = *kind;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.params = interferer_params_from(j.at("params"));
  if (j.contains("wav_path")) r.wav_path = j.at("wav_path").get<std::string>();
  return r;
}

json to_json(const ManifestParams& p) {
  json kinds = json::array();
  for (auto k : p.interferer_kinds) kinds.push_back(to_string(k));
  json j{{"n_snore", p.n_snore},
         {"n_interferer", p.n_interferer},
         {"snr_list", p.snr_list},
         {"n_subjects", p.n_subjects},
         {"test_fraction", p.test_fraction},
         {"n_folds", p.n_folds},
         {"sample_rate", p.sample_rate},
         {"clip_seconds", p.clip_seconds},
         {"level_min_db", p.level_min_db},
         {"level_max_db", p.level_max_db},
         {"f0_min_hz", p.f0_min_hz},
         {"f0_max_hz", p.f0_max_hz},
         {"harmonics_min", p.harmonics_min},
         {"harmonics_max", p.harmonics_max},
         {"rolloff_min", p.rolloff_min},
         {"rolloff_max", p.rolloff_max},
         {"duration_min_s", p.duration_min_s},
         {"duration_max_s", p.duration_max_s},
         {"jitter_pct", p.jitter_pct},
         {"breath_noise", p.breath_noise},
         {"interferer_kinds", kinds},
         {"interferer_defaults", to_json(p.interferer_defaults)}};
  j["interferer_pool"] = p.interferer_pool ? json(*p.interferer_pool) : json(nullptr);
  return j;
}

ManifestParams manifest_params_from(const json& j) {
  ManifestParams p;
  p.n_snore = j.at("n_snore").get<int>();
  p.n_interferer = j.at("n_interferer").get<int>();
  p.snr_list = j.at("snr_list").get<std::vector<double>>();
  p.n_subjects = j.at("n_subjects").get<int>();
  p.test_fraction = j.at("test_fraction").get<double>();
  p.n_folds = j.at("n_folds").get<int>();
  p.sample_rate = j.at("sample_rate").get<int>();
  p.clip_seconds = j.at("clip_seconds").get<double>();
  p.level_min_db = j.at("level_min_db").get<double>();
  p.level_max_db = j.at("level_max_db").get<double>();
  p.f0_min_hz = j.at("f0_min_hz").get<double>();
  p.f0_max_hz = j.at("f0_max_hz").get<double>();
  p.harmonics_min = j.at("harmonics_min").get<int>();
  p.harmonics_max = j.at("harmonics_max").get<int>();
  p.rolloff_min = j.at("rolloff_min").get<double>();
  p.rolloff_max = j.at("rolloff_max").get<double>();
  p.duration_min_s = j.at("duration_min_s").get<double>();
  p.duration_max_s = j.at("duration_max_s").get<double>();
  p.jitter_pct = j.at("jitter_pct").get<double>();
  p.breath_noise = j.value("breath_noise", 0.0);
  p.interferer_kinds.clear();
  for (const auto& k : j.at("interferer_kinds")) {
    const auto kind = parse_interferer_kind(k.get<std::string>());
    if (!kind) throw ParseError("unknown interferer kind in manifest header");
    p.interferer_kinds.push_back(*kind);
  }
  p.interferer_defaults = interferer_params_from(j.at("interferer_defaults"));
  if (j.contains("interferer_pool") && !j.at("interferer_pool").is_null()) {
    p.interferer_pool = j.at("interferer_pool").get<int>();
  }
  return p;
}

Split split_from(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw ParseError("unknown split '" + s + "'");
}

ItemClass class_from(const std::string& s) {
  if (s == "snore_mixture") return ItemClass::snore_mixture;
  if (s == "interferer") return ItemClass::interferer;
  throw ParseError("unknown class '" + s + "'");
}

}  // namespace

void write_manifest(std::ostream& out, const CorpusManifest& m) {
  json header{{"type", "header"}, {"seed", m.seed}, {"version", m.version}, {"generator", to_json(m.params)}};
  out << header.dump() << '\n';
  for (const auto& item : m.items) {
    json recipe{{"interferer", to_json(item.interferer)}, {"level_db", item.level_db}};
    if (item.snore) {
      json s{{"seed", item.snore->seed}, {"params", to_json(item.snore->params)}};
      if (item.snore->wav_path) s["wav_path"] = *item.snore->wav_path;
      recipe["snore"] = s;
    } else {
      recipe["snore"] = nullptr;
    }
    json j{{"id", item.id},
           {"class", to_string(item.item_class)},
           {"subject", item.subject},
           {"snr_db", item.snr_db ? json(*item.snr_db) : json(nullptr)},
           {"split", to_string(item.split)},
           {"fold", item.fold ? json(*item.fold) : json(nullptr)},
           {"recipe", recipe}};
    out << j.dump() << '\n';
  }
}

void write_manifest(const std::filesystem::path& path, const CorpusManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_manifest(out, m);
  if (!out) throw IoError("write failed for " + path.string());
}

CorpusManifest read_manifest(std::istream& in) {
  CorpusManifest m;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("type", "") != "header") throw ParseError("manifest must start with a header line");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.version = j.at("version").get<int>();
        m.params = manifest_params_from(j.at("generator"));
        have_header = true;
        continue;
      }
      CorpusItem item;
      item.id = j.at("id").get<std::string>();
      item.item_class = class_from(j.at("class").get<std::string>());
      item.subject = j.at("subject").get<std::string>();
      if (!j.at("snr_db").is_null()) item.snr_db = j.at("snr_db").get<double>();
      item.split = split_from(j.at("split").get<std::string>());
      if (!j.at("fold").is_null()) item.fold = j.at("fold").get<int>();
      const auto& r = j.at("recipe");
      item.interferer = interferer_recipe_from(r.at("interferer"));
      item.level_db = r.at("level_db").get<double>();
      if (!r.at("snore").is_null()) {
        SnoreRecipe s;
        s.seed = r.at("snore").at("seed").get<std::uint64_t>();
        s.params = snore_params_from(r.at("snore").at("params"));
        if (r.at("snore").contains("wav_path")) s.wav_path = r.at("snore").at("wav_path").get<std::string>();
        item.snore = s;
      }
      m.items.push_back(std::move(item));
    }
  } catch (const json::exception& e) {
    throw ParseError("manifest line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!have_header) throw ParseError("empty manifest");
  return m;
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_manifest(in);
}

}  // namespace snore
