#include "snore/evalstat.hpp"

#include "snore/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace snore {

const char* to_string(WilcoxonMethod m) noexcept {
  return m == WilcoxonMethod::exact ? "exact" : "normal_approx";
}

const char* to_string(Alternative a) noexcept {
  switch (a) {
    case Alternative::two_sided: return "two_sided";
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
  }
  return "unknown";
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ArgumentError("predictions and labels differ in length");
  if (predictions.empty()) throw ArgumentError("need at least one prediction");
  ConfusionMatrix c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i];
    const int y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1)) throw ArgumentError("entries must be 0 or 1");
    if (y == 1) {
      (p == 1 ? c.tp : c.fn) += 1;
    } else {
      (p == 1 ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport metrics(const ConfusionMatrix& c) {
  if (c.total() == 0) throw ArgumentError("empty confusion matrix");
  MetricsReport r;
  r.counts = c;
  r.acc = ratio(c.tp + c.tn, c.total());
  r.sen = ratio(c.tp, c.tp + c.fn);
  r.spe = ratio(c.tn, c.tn + c.fp);
  r.prec = ratio(c.tp, c.tp + c.fp);
  if (r.sen && r.spe) r.sco = (*r.sen + *r.spe) / 2.0;
  if (r.prec && r.sen && (*r.prec + *r.sen) > 0.0) {
    r.f1 = 2.0 * *r.prec * *r.sen / (*r.prec + *r.sen);
  }
  return r;
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ArgumentError("scores and labels differ in length");
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ArgumentError("labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw ArgumentError("ROC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult r;
  const double inf = std::numeric_limits<double>::infinity();
  r.curve.push_back({inf, 0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double thr = scores[order[i]];
    while (i < order.size() && scores[order[i]] == thr) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    r.curve.push_back({thr, static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  r.curve.push_back({-inf, 1.0, 1.0});

  double area = 0.0;
  for (std::size_t i = 1; i < r.curve.size(); ++i) {
    const auto& a = r.curve[i - 1];
    const auto& b = r.curve[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  r.auc = area;
  return r;
}

namespace {

double normal_sf(double z) noexcept { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    Alternative alt) {
  if (a.size() != b.size()) throw ArgumentError("paired samples differ in length");
  if (a.size() < 2) throw ArgumentError("need at least two pairs");

  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    if (!std::isfinite(diff)) throw ArgumentError("non-finite difference");
    if (diff != 0.0) d.push_back(diff);
  }
  const std::size_t n = d.size();
  if (n == 0) throw DegenerateError("all paired differences are zero");

  // Doubled average ranks of |d| (integers), plus tie-group sizes.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });
  std::vector<std::int64_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const auto r2 = static_cast<std::int64_t>(i + 1 + j + 1);  // 2 * average of ranks i+1..j+1
    for (std::size_t t = i; t <= j; ++t) rank2[order[t]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  std::int64_t w2 = 0;  // 2 * W+
  std::int64_t total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (d[i] > 0.0) w2 += rank2[i];
  }

  WilcoxonResult res;
  res.statistic = static_cast<double>(w2) / 2.0;
  res.n_effective = n;
  res.alternative = alt;

  if (n <= kWilcoxonExactMax) {
    res.method = WilcoxonMethod::exact;
    // counts[s] = number of sign patterns whose doubled positive-rank sum is s.
    std::vector<double> counts(static_cast<std::size_t>(total2) + 1, 0.0);
    counts[0] = 1.0;
    std::int64_t reach = 0;
    for (std::int64_t r : rank2) {
      for (std::int64_t s = reach; s >= 0; --s) {
        if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
      }
      reach += r;
    }
    const double patterns = std::ldexp(1.0, static_cast<int>(n));
    double hits = 0.0;
    const std::int64_t obs_dev = std::abs(2 * w2 - total2);
    for (std::int64_t s = 0; s <= total2; ++s) {
      const double c = counts[static_cast<std::size_t>(s)];
      if (c == 0.0) continue;
      bool extreme = false;
      switch (alt) {
        case Alternative::two_sided: extreme = std::abs(2 * s - total2) >= obs_dev; break;
        case Alternative::greater: extreme = s >= w2; break;
        case Alternative::less: extreme = s <= w2; break;
      }
      if (extreme) hits += c;
    }
    res.p_value = std::min(1.0, hits / patterns);
  } else {
    res.method = WilcoxonMethod::normal_approx;
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double sd = std::sqrt(var);
    const double w = res.statistic;
    double p = 1.0;
    switch (alt) {
      case Alternative::two_sided: {
        const double z = std::max(0.0, std::abs(w - mean) - 0.5) / sd;
        p = 2.0 * normal_sf(z);
        break;
      }
      case Alternative::greater: p = normal_sf((w - mean - 0.5) / sd); break;
      case Alternative::less: p = 1.0 - normal_sf((w - mean + 0.5) / sd); break;
    }
    res.p_value = std::clamp(p, 0.0, 1.0);
  }
  res.significant_at_0_05 = res.p_value < 0.05;
  return res;
}

namespace {

double median_sorted(std::span<const double> s) {
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

}  // namespace

BoxplotSummary summarize_boxplot(std::span<const double> data) {
  if (data.size() < 4) throw ArgumentError("box plot needs at least four points");
  std::vector<double> s(data.begin(), data.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  const std::size_t half = n / 2;

  BoxplotSummary b;
  b.median = median_sorted(s);
  b.q1 = median_sorted(std::span<const double>(s).first(half));
  b.q3 = median_sorted(std::span<const double>(s).last(half));
  b.mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);

  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.median;
  b.whisker_high = b.median;
  bool seen = false;
  for (double v : s) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
      continue;
    }
    if (!seen) {
      b.whisker_low = v;
      seen = true;
    }
    b.whisker_high = v;
  }
  return b;
}

}  // namespace snore
