#pragma once

#include "snore/corpus.hpp"
#include "snore/evalstat.hpp"
#include "snore/hpss.hpp"
#include "snore/learner.hpp"
#include "snore/tfr.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snore {

/// Spectrograms of one clip for each requested kind. STFT and Mel run at the
/// STFT rate, CQT and harmonic at the CQT rate; the harmonic kind reuses the CQT.
std::map<TfrKind, Spectrogram> compute_spectrograms(const AudioClip& clip, std::span<const TfrKind> kinds,
                                                    const TfrConfig& tfr = {}, const HpssConfig& hpss = {});

/// Pooled (unstandardized) network inputs keyed by item id and kind.
class FeatureBank {
public:
  void put(const std::string& id, FeatureTensor tensor);
  const FeatureTensor& get(const std::string& id, TfrKind kind) const;
  bool contains(const std::string& id, TfrKind kind) const;
  std::size_t size() const noexcept { return tensors_.size(); }

private:
  std::map<std::pair<std::string, TfrKind>, FeatureTensor> tensors_;
};

/// Renders every item and featurizes the requested kinds.
FeatureBank extract_features(const CorpusManifest& manifest, std::span<const TfrKind> kinds,
                             const TfrConfig& tfr = {}, const HpssConfig& hpss = {}, int jobs = 1);

struct LimitedData {
  std::size_t n_snore_train = 90;
  std::size_t n_interferer_train = 60;
};

struct ExperimentPlan {
  std::vector<TfrKind> kinds{TfrKind::cqt, TfrKind::harmonic};
  std::vector<std::uint64_t> seeds{1};
  int folds = 5;
  std::optional<LimitedData> limited;
  TrainConfig train;
  int jobs = 1;
  bool keep_models = false;  // fill RunRecord::model
};

struct RunRecord {
  TfrKind kind = TfrKind::cqt;
  std::uint64_t seed = 0;
  int fold = 0;
  MetricsReport metrics;
  TrainReport train;
  std::vector<std::string> test_ids;
  std::vector<double> scores;  // P(snore) per test item
  std::vector<int> labels;
  std::vector<std::size_t> train_items;
  std::vector<std::size_t> validation_items;
  std::optional<ModelParams> model;
};

/// Throws InvariantViolation if any test subject also appears in `train_subjects`.
void guard_subject_leakage(const CorpusManifest& manifest, std::span<const std::size_t> train_items);

/// For every (kind, seed, fold): optional limited-data subsample (seeded by the
/// experiment seed), subject-grouped folds, training with early stopping on the
/// held-out fold, evaluation on the untouched test split. Records come back
/// ordered by kind, then seed, then fold. Runs that share (seed, fold) share
/// the data split and the initial weights, so kinds are paired.
std::vector<RunRecord> run_experiment(const CorpusManifest& manifest, const FeatureBank& features,
                                      const ExperimentPlan& plan);

/// Accuracies of the records of one kind, in (seed, fold) order.
std::vector<double> accuracies(std::span<const RunRecord> records, TfrKind kind);
std::vector<double> aucs(std::span<const RunRecord> records, TfrKind kind);

}  // namespace snore
