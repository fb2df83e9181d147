#pragma once

#include "snore/audio_io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace snore {

/// Harmonic snore surrogate. Amplitude of harmonic h is 1 / h^rolloff; the
/// fundamental wanders by up to jitter_pct percent.
struct SnoreSynthParams {
  double f0_hz = 120.0;
  int n_harmonics = 12;
  double harmonic_rolloff = 1.0;
  double duration_s = 1.5;
  double jitter_pct = 1.0;
  double attack_s = 0.08;
  double decay_s = 0.25;
  /// Level of airflow noise riding on the event, relative to the harmonic stack RMS.
  double breath_noise = 0.0;
  int sample_rate = 48000;
  double clip_seconds = kClipSeconds;
  double peak = 0.5;

  void validate() const;
};

enum class InterfererKind { click_train, white_burst, pink_burst, cough_surrogate };

const char* to_string(InterfererKind kind) noexcept;
std::optional<InterfererKind> parse_interferer_kind(std::string_view text) noexcept;

struct InterfererParams {
  int sample_rate = 48000;
  double clip_seconds = kClipSeconds;
  /// RMS of the whole generated clip.
  double rms_target = 0.05;
  double click_period_s = 0.25;
  double click_width_s = 0.001;
  double burst_duration_s = 1.2;
  /// Exponential decay time constant of a cough event.
  double cough_decay_s = 0.08;
  int cough_events = 2;

  void validate() const;
};

AudioClip synth_snore(const SnoreSynthParams& params, std::uint64_t seed);

AudioClip synth_interferer(InterfererKind kind, std::uint64_t seed, const InterfererParams& params = {});

/// Smallest duration T (the ceil(coverage * n)-th order statistic) such that at
/// least `coverage` of the durations are <= T.
double duration_histogram(std::span<const double> durations_s, double coverage = 0.97);

enum class ItemClass { snore_mixture, interferer };
enum class Split { train, validation, test };

const char* to_string(ItemClass c) noexcept;
const char* to_string(Split s) noexcept;

/// Recipe for one synthetic or file-backed interferer.
struct InterfererRecipe {
  InterfererKind kind = InterfererKind::white_burst;
  std::uint64_t seed = 0;
  InterfererParams params;
  /// When set, the clip is read from this WAV instead of synthesized.
  std::optional<std::string> wav_path;
};

struct SnoreRecipe {
  SnoreSynthParams params;
  std::uint64_t seed = 0;
  std::optional<std::string> wav_path;
};

struct CorpusItem {
  std::string id;
  ItemClass item_class = ItemClass::interferer;
  std::string subject;
  std::optional<double> snr_db;
  Split split = Split::train;
  std::optional<int> fold;
  std::optional<SnoreRecipe> snore;
  InterfererRecipe interferer;
  /// Overall gain applied after mixing, in dB.
  double level_db = 0.0;

  int label() const noexcept { return item_class == ItemClass::snore_mixture ? 1 : 0; }
};

struct ManifestParams {
  int n_snore = 100;
  int n_interferer = 100;
  std::vector<double> snr_list{-5.0, 0.0, 5.0};
  int n_subjects = 30;
  double test_fraction = 0.1;
  int n_folds = 5;
  /// Interferer pool size; defaults to n_snore + n_interferer.
  std::optional<int> interferer_pool;
  int sample_rate = 48000;
  double clip_seconds = kClipSeconds;
  double level_min_db = -20.0;
  double level_max_db = 0.0;
  double f0_min_hz = 60.0;
  double f0_max_hz = 220.0;
  int harmonics_min = 8;
  int harmonics_max = 16;
  double rolloff_min = 0.6;
  double rolloff_max = 1.6;
  double duration_min_s = 0.3;
  double duration_max_s = 3.0;
  double jitter_pct = 1.5;
  double breath_noise = 0.0;
  std::vector<InterfererKind> interferer_kinds{InterfererKind::click_train, InterfererKind::white_burst,
                                               InterfererKind::pink_burst, InterfererKind::cough_surrogate};
  InterfererParams interferer_defaults;

  void validate() const;
};

struct CorpusManifest {
  std::vector<CorpusItem> items;
  std::uint64_t seed = 0;
  int version = 1;
  ManifestParams params;

  std::size_t count(ItemClass c) const noexcept;
  std::size_t count(ItemClass c, Split s) const noexcept;
  /// Sorted unique subjects among items with the given split.
  std::vector<std::string> subjects(Split s) const;
  /// Sorted unique subjects among items not in the test split.
  std::vector<std::string> non_test_subjects() const;
};

/// Pairs each snore with a distinct interferer from a pool disjoint from the
/// unmixed interferers, replicates it at every SNR, assigns subjects
/// round-robin, holds out ~test_fraction of subjects for testing, and assigns
/// folds to the remaining subjects.
CorpusManifest build_manifest(const ManifestParams& params, std::uint64_t seed);

struct FoldSplit {
  std::vector<std::size_t> train;       // item indices
  std::vector<std::size_t> validation;  // item indices
  std::vector<std::string> validation_subjects;
};

/// Partitions the non-test subjects into k near-equal groups; fold i validates
/// on group i and trains on the rest.
std::vector<FoldSplit> kfold_subject_splits(const CorpusManifest& manifest, int k, std::uint64_t seed);

/// Copy of the manifest with every non-test item's fold set from kfold_subject_splits.
CorpusManifest assign_folds(const CorpusManifest& manifest, int k, std::uint64_t seed);

/// Seeded uniform subsample of the non-test items per class; test items kept.
CorpusManifest subsample_limited(const CorpusManifest& manifest, std::size_t n_snore_train,
                                 std::size_t n_interferer_train, std::uint64_t seed);

/// Throws InvariantViolation when a subject appears in both test and non-test
/// items, or when fold labels do not follow subjects.
void check_manifest(const CorpusManifest& manifest);

/// Renders one item at the manifest sample rate and clip duration.
AudioClip render_item(const CorpusItem& item, const ManifestParams& params);

/// SNR recomputed from the item's components, before any peak rescaling.
double measured_snr_db(const CorpusItem& item, const ManifestParams& params);

void write_manifest(std::ostream& out, const CorpusManifest& manifest);
void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(std::istream& in);
CorpusManifest read_manifest(const std::filesystem::path& path);

}  // namespace snore
