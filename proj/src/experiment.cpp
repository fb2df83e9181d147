#include "snore/experiment.hpp"

#include "snore/errors.hpp"
#include "snore/parallel.hpp"
#include "snore/rng.hpp"

#include <algorithm>
#include <mutex>
#include <set>

namespace snore {

std::map<TfrKind, Spectrogram> compute_spectrograms(const AudioClip& clip, std::span<const TfrKind> kinds,
                                                    const TfrConfig& tfr, const HpssConfig& hpss) {
  const auto wants = [&](TfrKind k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };
  std::map<TfrKind, Spectrogram> out;
  if (wants(TfrKind::stft) || wants(TfrKind::mel)) {
    const auto low = clip.sample_rate == tfr.stft_rate ? clip : resample(clip, tfr.stft_rate);
    auto stft = stft_magnitude(low, tfr);
    if (wants(TfrKind::mel)) out[TfrKind::mel] = mel_spectrogram(stft, tfr);
    if (wants(TfrKind::stft)) out[TfrKind::stft] = std::move(stft);
  }
  if (wants(TfrKind::cqt) || wants(TfrKind::harmonic)) {
    const auto high = clip.sample_rate == tfr.cqt_rate ? clip : resample(clip, tfr.cqt_rate);
    auto cqt = cqt_magnitude(high, tfr);
    if (wants(TfrKind::harmonic)) out[TfrKind::harmonic] = hpss_separate(cqt, hpss).enhanced;
    if (wants(TfrKind::cqt)) out[TfrKind::cqt] = std::move(cqt);
  }
  return out;
}

void FeatureBank::put(const std::string& id, FeatureTensor tensor) {
  const TfrKind kind = tensor.kind;
  tensors_[{id, kind}] = std::move(tensor);
}

const FeatureTensor& FeatureBank::get(const std::string& id, TfrKind kind) const {
  const auto it = tensors_.find({id, kind});
  if (it == tensors_.end()) {
    throw ArgumentError("no " + std::string(to_string(kind)) + " features for item " + id);
  }
  return it->second;
}

bool FeatureBank::contains(const std::string& id, TfrKind kind) const {
  return tensors_.count({id, kind}) > 0;
}

FeatureBank extract_features(const CorpusManifest& manifest, std::span<const TfrKind> kinds,
                             const TfrConfig& tfr, const HpssConfig& hpss, int jobs) {
  std::vector<std::vector<FeatureTensor>> slots(manifest.items.size());
  parallel_for(manifest.items.size(), jobs, [&](std::size_t i) {
    const auto clip = render_item(manifest.items[i], manifest.params);
    for (auto& [kind, spec] : compute_spectrograms(clip, kinds, tfr, hpss)) {
      slots[i].push_back(featurize(spec));
    }
  });
  FeatureBank bank;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    for (auto& t : slots[i]) bank.put(manifest.items[i].id, std::move(t));
  }
  return bank;
}

void guard_subject_leakage(const CorpusManifest& manifest, std::span<const std::size_t> train_items) {
  std::set<std::string> test;
  for (const auto& item : manifest.items) {
    if (item.split == Split::test) test.insert(item.subject);
  }
  for (std::size_t idx : train_items) {
    const auto& item = manifest.items.at(idx);
    if (item.split == Split::test) throw InvariantViolation("test item " + item.id + " used for training");
    if (test.count(item.subject)) {
      throw InvariantViolation("subject " + item.subject + " leaks from the test split into training");
    }
  }
}

namespace {

struct RunUnit {
  std::size_t kind_index;
  std::size_t seed_index;
  int fold;
};

std::vector<Example> examples_for(const CorpusManifest& m, std::span<const std::size_t> idx,
                                  const std::vector<FeatureTensor>& standardized) {
  std::vector<Example> out;
  out.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out.push_back({&standardized[i], m.items[idx[i]].label()});
  return out;
}

RunRecord run_one(const CorpusManifest& manifest, const FeatureBank& features, const ExperimentPlan& plan,
                  const RunUnit& unit) {
  const TfrKind kind = plan.kinds[unit.kind_index];
  const std::uint64_t seed = plan.seeds[unit.seed_index];
  const CorpusManifest m =
      plan.limited ? subsample_limited(manifest, plan.limited->n_snore_train, plan.limited->n_interferer_train, seed)
                   : manifest;
  check_manifest(m);
  const auto folds = kfold_subject_splits(m, plan.folds, seed);
  const auto& split = folds.at(static_cast<std::size_t>(unit.fold));
  guard_subject_leakage(m, split.train);
  guard_subject_leakage(m, split.validation);

  std::vector<std::size_t> test_idx;
  for (std::size_t i = 0; i < m.items.size(); ++i) {
    if (m.items[i].split == Split::test) test_idx.push_back(i);
  }
  if (test_idx.empty()) throw ArgumentError("manifest has no test items");

  std::vector<const FeatureTensor*> raw_train;
  for (std::size_t i : split.train) raw_train.push_back(&features.get(m.items[i].id, kind));
  const auto standardizer = Standardizer::fit(std::span<const FeatureTensor* const>(raw_train));
  const auto standardize = [&](std::span<const std::size_t> idx) {
    std::vector<FeatureTensor> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(standardizer.apply(features.get(m.items[i].id, kind)));
    return out;
  };
  const auto train_x = standardize(split.train);
  const auto val_x = standardize(split.validation);
  const auto test_x = standardize(test_idx);
  const auto train_set = examples_for(m, split.train, train_x);
  const auto val_set = examples_for(m, split.validation, val_x);

  TrainConfig cfg = plan.train;
  cfg.seed = child_seed(seed, static_cast<std::uint64_t>(unit.fold));
  const auto init = ModelParams::he_init(child_seed(cfg.seed, hash_tag("init")));
  auto trained = train(train_set, val_set, cfg, init);

  RunRecord rec;
  rec.kind = kind;
  rec.seed = seed;
  rec.fold = unit.fold;
  rec.train = std::move(trained.report);
  std::vector<int> preds;
  for (std::size_t t = 0; t < test_idx.size(); ++t) {
    const auto p = forward(trained.model, test_x[t]);
    rec.test_ids.push_back(m.items[test_idx[t]].id);
    rec.scores.push_back(p[1]);
    rec.labels.push_back(m.items[test_idx[t]].label());
    preds.push_back(p[1] > p[0] ? 1 : 0);
  }
  rec.metrics = metrics(confusion(preds, rec.labels));
  const bool both = std::count(rec.labels.begin(), rec.labels.end(), 1) > 0 &&
                    std::count(rec.labels.begin(), rec.labels.end(), 0) > 0;
  if (both) rec.metrics.auc = roc_auc(rec.scores, rec.labels).auc;
  for (std::size_t i : split.train) rec.train_items.push_back(i);
  for (std::size_t i : split.validation) rec.validation_items.push_back(i);
  if (plan.keep_models) rec.model = std::move(trained.model);
  return rec;
}

}  // namespace

std::vector<RunRecord> run_experiment(const CorpusManifest& manifest, const FeatureBank& features,
                                      const ExperimentPlan& plan) {
  plan.train.validate();
  if (plan.kinds.empty() || plan.seeds.empty()) throw ArgumentError("experiment needs kinds and seeds");
  if (plan.folds < 2) throw ArgumentError("need at least two folds");
  check_manifest(manifest);

  std::vector<RunUnit> units;
  for (std::size_t k = 0; k < plan.kinds.size(); ++k) {
    for (std::size_t s = 0; s < plan.seeds.size(); ++s) {
      for (int f = 0; f < plan.folds; ++f) units.push_back({k, s, f});
    }
  }
  std::vector<RunRecord> records(units.size());
  parallel_for(units.size(), plan.jobs,
               [&](std::size_t i) { records[i] = run_one(manifest, features, plan, units[i]); });
  return records;
}

std::vector<double> accuracies(std::span<const RunRecord> records, TfrKind kind) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.kind == kind) out.push_back(r.metrics.acc.value_or(0.0));
  }
  return out;
}

std::vector<double> aucs(std::span<const RunRecord> records, TfrKind kind) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.kind == kind && r.metrics.auc) out.push_back(*r.metrics.auc);
  }
  return out;
}

}  // namespace snore
