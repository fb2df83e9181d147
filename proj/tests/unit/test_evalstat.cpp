#include "oracles.hpp"

#include "snore/errors.hpp"
#include "snore/evalstat.hpp"
#include "snore/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace snore;

namespace {

oracle::Side side_of(Alternative a) {
  switch (a) {
    case Alternative::greater: return oracle::Side::greater;
    case Alternative::less: return oracle::Side::less;
    default: return oracle::Side::two_sided;
  }
}

WilcoxonResult wilcoxon_d(const std::vector<double>& d, Alternative alt = Alternative::two_sided) {
  const std::vector<double> zero(d.size(), 0.0);
  return wilcoxon_signed_rank(d, zero, alt);
}

}  // namespace

TEST_CASE("confusion counts") {
  const std::vector<int> pos{1, 1, 1, 1};
  CHECK(confusion(pos, pos) == ConfusionMatrix{4, 0, 0, 0});
  const std::vector<int> a{1, 0, 1, 0}, na{0, 1, 0, 1};
  const auto c = confusion(na, a);
  CHECK(c.tp == 0);
  CHECK(c.tn == 0);
  const std::vector<int> p{1, 1, 0, 0}, y{1, 0, 1, 0};
  CHECK(confusion(p, y) == ConfusionMatrix{1, 1, 1, 1});
  CHECK_THROWS_AS(confusion(p, std::vector<int>{1, 0}), ArgumentError);
  CHECK_THROWS_AS(confusion(std::vector<int>{}, std::vector<int>{}), ArgumentError);
  CHECK_THROWS_AS(confusion(std::vector<int>{2}, std::vector<int>{1}), ArgumentError);
}

TEST_CASE("metrics worked example") {
  const auto m = metrics({92, 95, 5, 8});
  CHECK(*m.acc == doctest::Approx(0.935).epsilon(1e-15));
  CHECK(*m.sen == doctest::Approx(0.92).epsilon(1e-15));
  CHECK(*m.spe == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(*m.prec == doctest::Approx(92.0 / 97.0).epsilon(1e-15));
  CHECK(*m.prec == doctest::Approx(0.9485).epsilon(1e-4));
  CHECK(*m.sco == doctest::Approx(0.935).epsilon(1e-15));
  CHECK(*m.f1 == doctest::Approx(0.9340).epsilon(1e-4));

  const auto perfect = metrics({3, 7, 0, 0});
  for (const auto& v : {perfect.acc, perfect.sen, perfect.spe, perfect.prec, perfect.sco, perfect.f1}) CHECK(*v == 1.0);

  const auto neg = metrics({0, 6, 0, 0});
  CHECK_FALSE(neg.sen.has_value());
  CHECK_FALSE(neg.prec.has_value());
  CHECK_FALSE(neg.f1.has_value());
  CHECK_FALSE(neg.sco.has_value());
  CHECK(*neg.spe == 1.0);
  CHECK(*neg.acc == 1.0);

  CHECK_THROWS_AS(metrics({0, 0, 0, 0}), ArgumentError);
}

TEST_CASE("metrics match a recount from raw pairs") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + rng.below(60);
    std::vector<int> p, y;
    for (std::uint64_t i = 0; i < n; ++i) {
      p.push_back(static_cast<int>(rng.below(2)));
      y.push_back(static_cast<int>(rng.below(2)));
    }
    const auto m = metrics(confusion(p, y));
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tp += p[i] == 1 && y[i] == 1;
      tn += p[i] == 0 && y[i] == 0;
      fp += p[i] == 1 && y[i] == 0;
      fn += p[i] == 0 && y[i] == 1;
    }
    CHECK(*m.acc == (tp + tn) / (tp + tn + fp + fn));
    CHECK(m.sen.has_value() == (tp + fn > 0));
    CHECK(m.spe.has_value() == (tn + fp > 0));
    CHECK(m.prec.has_value() == (tp + fp > 0));
    if (m.sen) CHECK(*m.sen == tp / (tp + fn));
    if (m.spe) CHECK(*m.spe == tn / (tn + fp));
    if (m.prec) CHECK(*m.prec == tp / (tp + fp));
    CHECK(m.sco.has_value() == (m.sen && m.spe));
    if (m.sco) CHECK(*m.sco == (*m.sen + *m.spe) / 2.0);
    if (m.f1) CHECK(*m.f1 == 2.0 * *m.prec * *m.sen / (*m.prec + *m.sen));
    if (!m.sen || !m.prec) CHECK_FALSE(m.f1.has_value());
  }
}

TEST_CASE("ROC worked examples") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y{0, 0, 1, 1};
  const auto r = roc_auc(s, y);
  CHECK(r.auc == doctest::Approx(0.75).epsilon(1e-15));
  REQUIRE(r.curve.size() == 6);
  CHECK(std::isinf(r.curve.front().threshold));
  CHECK(r.curve.front().fpr == 0.0);
  CHECK(r.curve.front().tpr == 0.0);
  CHECK(r.curve.back().fpr == 1.0);
  CHECK(r.curve.back().tpr == 1.0);

  const std::vector<double> sep{0.1, 0.2, 0.9, 0.95};
  CHECK(roc_auc(sep, y).auc == 1.0);
  const std::vector<double> tied(4, 0.3);
  const auto t = roc_auc(tied, y);
  CHECK(t.auc == 0.5);
  CHECK(t.curve.size() == 3);
  CHECK_THROWS_AS(roc_auc(sep, std::vector<int>{1, 1, 1, 1}), ArgumentError);
  CHECK_THROWS_AS(roc_auc(sep, std::vector<int>{1, 0}), ArgumentError);
}

TEST_CASE("ROC against pair counting, with monotone invariance") {
  Rng rng(32);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = 2 + rng.below(40);
    std::vector<double> s;
    std::vector<int> y;
    for (std::uint64_t i = 0; i < n; ++i) {
      s.push_back(static_cast<double>(rng.below(8)) / 8.0);  // coarse grid forces ties
      y.push_back(static_cast<int>(rng.below(2)));
    }
    y[0] = 0;
    y[1] = 1;
    const auto r = roc_auc(s, y);
    CHECK(r.auc == doctest::Approx(oracle::auc_pairs(s, y)).epsilon(1e-12));
    std::vector<double> u = s;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    CHECK(r.curve.size() == u.size() + 2);
    for (std::size_t i = 1; i < r.curve.size(); ++i) {
      CHECK(r.curve[i].fpr >= r.curve[i - 1].fpr);
      CHECK(r.curve[i].tpr >= r.curve[i - 1].tpr);
    }
    std::vector<double> warped;
    for (double v : s) warped.push_back(std::exp(3.0 * v) - 7.0);
    CHECK(roc_auc(warped, y).auc == doctest::Approx(r.auc).epsilon(1e-15));
  }
}

TEST_CASE("Wilcoxon worked examples") {
  const auto r = wilcoxon_d({1, 2, 3, 4, 5});
  CHECK(r.statistic == 15.0);
  CHECK(r.n_effective == 5);
  CHECK(r.method == WilcoxonMethod::exact);
  CHECK(r.p_value == doctest::Approx(0.0625).epsilon(1e-15));
  CHECK_FALSE(r.significant_at_0_05);
  CHECK(wilcoxon_d({1, 2, 3, 4, 5}, Alternative::greater).p_value == doctest::Approx(1.0 / 32.0).epsilon(1e-15));
  CHECK(wilcoxon_d({1, 2, 3, 4, 5}, Alternative::less).p_value == 1.0);

  const auto tie = wilcoxon_d({1, -1});
  CHECK(tie.statistic == 1.5);
  CHECK(tie.p_value == 1.0);

  const std::vector<double> a{0.9, 0.8, 0.7};
  CHECK_THROWS_AS(wilcoxon_signed_rank(a, a), DegenerateError);
  CHECK_THROWS_AS(wilcoxon_signed_rank(a, std::vector<double>{1.0, 2.0}), ArgumentError);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1.0}, std::vector<double>{0.0}), ArgumentError);

  // Zero differences are dropped before ranking.
  const auto z = wilcoxon_d({0, 0, 1, 2, 3});
  CHECK(z.n_effective == 3);
  CHECK(z.p_value == doctest::Approx(0.25).epsilon(1e-15));

  // Twelve wins out of twelve, one-sided.
  std::vector<double> wins;
  for (int i = 1; i <= 12; ++i) wins.push_back(0.01 * i);
  CHECK(wilcoxon_d(wins, Alternative::greater).p_value == doctest::Approx(1.0 / 4096.0).epsilon(1e-15));
}

TEST_CASE("Wilcoxon exact p matches full enumeration") {
  Rng rng(33);
  for (std::size_t n = 2; n <= 10; ++n) {
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> d;
      for (std::size_t i = 0; i < n; ++i) {
        // Small integer magnitudes give plenty of ties and some zeros.
        const double mag = static_cast<double>(rng.below(5));
        d.push_back(rng.below(2) ? mag : -mag);
      }
      if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) d[0] = 1.0;
      for (auto alt : {Alternative::two_sided, Alternative::greater, Alternative::less}) {
        const auto got = wilcoxon_d(d, alt);
        const auto want = oracle::wilcoxon(d, side_of(alt));
        CHECK(got.statistic == doctest::Approx(want.w_plus).epsilon(1e-15));
        CHECK(std::abs(got.p_value - want.p) <= 1e-12);
        CHECK(got.alternative == alt);
      }
      // Swapping a and b mirrors W and keeps the two-sided p.
      std::vector<double> neg;
      for (double v : d) neg.push_back(-v);
      CHECK(std::abs(wilcoxon_d(neg).p_value - wilcoxon_d(d).p_value) <= 1e-12);
    }
  }
}

TEST_CASE("Wilcoxon switches to the normal approximation above 25") {
  Rng rng(34);
  std::vector<double> d;
  for (int i = 0; i < 25; ++i) d.push_back(rng.normal() + 0.3);
  CHECK(wilcoxon_d(d).method == WilcoxonMethod::exact);
  d.push_back(0.7);
  const auto r = wilcoxon_d(d);
  CHECK(r.method == WilcoxonMethod::normal_approx);
  CHECK(r.p_value >= 0.0);
  CHECK(r.p_value <= 1.0);

  // Hand-computed: 30 distinct positive differences, W = 465, mean 232.5,
  // var = 30*31*61/24 = 2363.75, z = (465 - 232.5 - 0.5)/sqrt(var).
  std::vector<double> up;
  for (int i = 1; i <= 30; ++i) up.push_back(i);
  const auto g = wilcoxon_d(up, Alternative::greater);
  const double zg = (465.0 - 232.5 - 0.5) / std::sqrt(2363.75);
  CHECK(g.p_value == doctest::Approx(0.5 * std::erfc(zg / std::sqrt(2.0))).epsilon(1e-12));
  CHECK(wilcoxon_d(up).p_value == doctest::Approx(std::erfc(zg / std::sqrt(2.0))).epsilon(1e-12));
  CHECK(wilcoxon_d(up).significant_at_0_05);
}

TEST_CASE("boxplot summary") {
  const std::vector<double> five{1, 2, 3, 4, 5};
  const auto b = summarize_boxplot(five);
  CHECK(b.median == 3.0);
  CHECK(b.q1 == 1.5);
  CHECK(b.q3 == 4.5);
  CHECK(b.mean == 3.0);
  CHECK(b.outliers.empty());
  CHECK(b.whisker_low == 1.0);
  CHECK(b.whisker_high == 5.0);

  const std::vector<double> flat(6, 2.5);
  const auto f = summarize_boxplot(flat);
  CHECK(f.q1 == 2.5);
  CHECK(f.q3 == 2.5);
  CHECK(f.outliers.empty());

  // With median-exclusive halves q3 = 50.5 and the upper fence is 124.75, so
  // 100 is not flagged; with more bulk points the same value is.
  const std::vector<double> spike{1, 1, 1, 1, 100};
  const auto s = summarize_boxplot(spike);
  CHECK(s.q3 == 50.5);
  CHECK(s.outliers.empty());
  const std::vector<double> spike7{1, 1, 1, 1, 1, 1, 100};
  const auto s7 = summarize_boxplot(spike7);
  REQUIRE(s7.outliers.size() == 1);
  CHECK(s7.outliers[0] == 100.0);
  CHECK(s7.whisker_high == 1.0);

  CHECK_THROWS_AS(summarize_boxplot(std::vector<double>{1, 2, 3}), ArgumentError);
}

TEST_CASE("boxplot flags exactly the points beyond the fences") {
  Rng rng(35);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> x;
    const auto n = 4 + rng.below(30);
    for (std::uint64_t i = 0; i < n; ++i) x.push_back(rng.below(5) == 0 ? rng.normal() * 10.0 : rng.normal());
    const auto b = summarize_boxplot(x);
    const double iqr = b.q3 - b.q1;
    std::vector<double> want;
    double lo = INFINITY, hi = -INFINITY;
    for (double v : x) {
      if (v < b.q1 - 1.5 * iqr || v > b.q3 + 1.5 * iqr) {
        want.push_back(v);
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    auto got = b.outliers;
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);
    CHECK(b.whisker_low == lo);
    CHECK(b.whisker_high == hi);
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const double med = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
    CHECK(b.median == med);
  }
}
