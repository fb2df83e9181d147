#include "snore/errors.hpp"
#include "snore/experiment.hpp"
#include "snore/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

using namespace snore;

namespace {

CorpusManifest small_manifest(std::uint64_t seed = 7) {
  ManifestParams p;
  p.n_snore = 8;
  p.n_interferer = 12;
  p.n_subjects = 12;
  p.test_fraction = 0.17;
  return build_manifest(p, seed);
}

// Synthetic features: a class-dependent band plus noise, different per kind.
FeatureBank fake_bank(const CorpusManifest& m) {
  FeatureBank bank;
  for (const auto& item : m.items) {
    for (TfrKind kind : {TfrKind::cqt, TfrKind::harmonic}) {
      Rng rng(child_seed(hash_tag(item.id), static_cast<std::uint64_t>(kind)));
      FeatureTensor t;
      t.kind = kind;
      for (auto& v : t.values.data()) v = std::exp(rng.normal());
      const double lift = item.label() ? 3.0 : 1.0;
      for (std::size_t r = 20; r < 40; ++r) {
        for (auto& v : t.values.row(r)) v *= lift;
      }
      bank.put(item.id, std::move(t));
    }
  }
  return bank;
}

ExperimentPlan quick_plan() {
  ExperimentPlan plan;
  plan.seeds = {1, 2};
  plan.folds = 3;
  plan.train.max_epochs = 3;
  plan.train.patience = 3;
  plan.train.batch_size = 16;
  return plan;
}

}  // namespace

TEST_CASE("spectrograms of one clip for every kind") {
  AudioClip clip;
  clip.sample_rate = 48000;
  for (int i = 0; i < 28800; ++i) clip.samples.push_back(0.3 * std::sin(2.0 * std::numbers::pi * 220.0 * i / 48000.0));
  const std::vector<TfrKind> kinds{TfrKind::stft, TfrKind::mel, TfrKind::cqt, TfrKind::harmonic};
  const auto specs = compute_spectrograms(clip, kinds);
  REQUIRE(specs.size() == 4);
  CHECK(specs.at(TfrKind::stft).bins() == 129);
  CHECK(specs.at(TfrKind::stft).sample_rate == 8000);
  CHECK(specs.at(TfrKind::mel).kind == TfrKind::mel);
  CHECK(specs.at(TfrKind::cqt).bins() == 84);
  CHECK(specs.at(TfrKind::harmonic).bins() == 84);
  CHECK(specs.at(TfrKind::harmonic).frames() == specs.at(TfrKind::cqt).frames());
  CHECK(specs.at(TfrKind::harmonic).kind == TfrKind::harmonic);
  const auto& c = specs.at(TfrKind::cqt).values.data();
  const auto& h = specs.at(TfrKind::harmonic).values.data();
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(h[i] <= c[i] + 1e-15);

  const std::vector<TfrKind> only{TfrKind::harmonic};
  CHECK(compute_spectrograms(clip, only).size() == 1);
}

TEST_CASE("feature extraction matches per-clip computation") {
  ManifestParams p;
  p.n_snore = 1;
  p.n_interferer = 3;
  p.n_subjects = 6;
  p.test_fraction = 0.2;
  p.n_folds = 2;
  const auto m = build_manifest(p, 3);
  const std::vector<TfrKind> kinds{TfrKind::cqt};
  const auto bank = extract_features(m, kinds);
  CHECK(bank.size() == m.items.size());
  const auto& item = m.items.front();
  const auto direct = featurize(compute_spectrograms(render_item(item, m.params), kinds).at(TfrKind::cqt));
  CHECK(bank.get(item.id, TfrKind::cqt).values == direct.values);
  CHECK_FALSE(bank.contains(item.id, TfrKind::harmonic));
  CHECK_THROWS_AS(bank.get(item.id, TfrKind::harmonic), ArgumentError);
}

TEST_CASE("leakage guard") {
  const auto m = small_manifest();
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < m.items.size(); ++i) (m.items[i].split == Split::test ? test : train).push_back(i);
  REQUIRE_FALSE(test.empty());
  CHECK_NOTHROW(guard_subject_leakage(m, train));
  const std::vector<std::size_t> with_test{train.front(), test.front()};
  CHECK_THROWS_AS(guard_subject_leakage(m, with_test), InvariantViolation);

  // A training item that carries a test subject is caught too.
  auto leaky = m;
  leaky.items[train.front()].subject = m.items[test.front()].subject;
  CHECK_THROWS_AS(guard_subject_leakage(leaky, train), InvariantViolation);
  CHECK_THROWS_AS(run_experiment(leaky, fake_bank(leaky), quick_plan()), InvariantViolation);
}

TEST_CASE("records are ordered and paired across kinds") {
  const auto m = small_manifest();
  const auto bank = fake_bank(m);
  const auto plan = quick_plan();
  const auto recs = run_experiment(m, bank, plan);
  REQUIRE(recs.size() == 2 * 2 * 3);

  std::size_t i = 0;
  for (TfrKind kind : plan.kinds) {
    for (auto seed : plan.seeds) {
      for (int fold = 0; fold < plan.folds; ++fold, ++i) {
        CHECK(recs[i].kind == kind);
        CHECK(recs[i].seed == seed);
        CHECK(recs[i].fold == fold);
      }
    }
  }
  const std::size_t half = recs.size() / 2;
  std::set<std::string> test_subjects;
  for (const auto& item : m.items) {
    if (item.split == Split::test) test_subjects.insert(item.subject);
  }
  for (std::size_t j = 0; j < half; ++j) {
    const auto& a = recs[j];
    const auto& b = recs[half + j];
    CHECK(a.train_items == b.train_items);
    CHECK(a.validation_items == b.validation_items);
    CHECK(a.test_ids == b.test_ids);
    CHECK(a.labels == b.labels);
    CHECK(a.metrics.counts.total() == a.test_ids.size());
    for (std::size_t t : a.train_items) CHECK(test_subjects.count(m.items[t].subject) == 0);
    std::vector<std::size_t> overlap;
    std::set_intersection(a.train_items.begin(), a.train_items.end(), a.validation_items.begin(),
                          a.validation_items.end(), std::back_inserter(overlap));
    CHECK(overlap.empty());
    CHECK(a.train.stopped_epoch >= 1);
    CHECK(a.metrics.auc.has_value());
  }
  CHECK(accuracies(recs, TfrKind::cqt).size() == 6);
  CHECK(aucs(recs, TfrKind::harmonic).size() == 6);
}

TEST_CASE("experiments are deterministic and independent of the job count") {
  const auto m = small_manifest();
  const auto bank = fake_bank(m);
  auto plan = quick_plan();
  plan.seeds = {4};
  const auto a = run_experiment(m, bank, plan);
  plan.jobs = 3;
  const auto b = run_experiment(m, bank, plan);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].scores == b[i].scores);
    CHECK(a[i].train.best_epoch == b[i].train.best_epoch);
  }
}

TEST_CASE("limited-data runs draw their training pool per seed") {
  ManifestParams p;
  p.n_snore = 20;
  p.n_interferer = 30;
  p.n_subjects = 20;
  const auto m = build_manifest(p, 9);
  const auto bank = fake_bank(m);
  auto plan = quick_plan();
  plan.kinds = {TfrKind::cqt};
  plan.limited = LimitedData{24, 16};
  const auto recs = run_experiment(m, bank, plan);
  for (const auto& r : recs) CHECK(r.train_items.size() + r.validation_items.size() == 40);
  CHECK(recs.front().train_items != recs[static_cast<std::size_t>(plan.folds)].train_items);

  auto bad = quick_plan();
  bad.kinds.clear();
  CHECK_THROWS_AS(run_experiment(m, bank, bad), ArgumentError);
  auto one_fold = quick_plan();
  one_fold.folds = 1;
  CHECK_THROWS_AS(run_experiment(m, bank, one_fold), ArgumentError);
}
