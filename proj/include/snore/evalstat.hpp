#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snore {

/// Binary confusion counts with snore as the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Derived rates. An empty optional marks a ratio whose denominator is zero.
struct MetricsReport {
  ConfusionMatrix counts;
  std::optional<double> acc;
  std::optional<double> sen;
  std::optional<double> spe;
  std::optional<double> prec;
  std::optional<double> sco;
  std::optional<double> f1;
  std::optional<double> auc;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels);

MetricsReport metrics(const ConfusionMatrix& c);

struct RocPoint {
  double threshold;  // predict positive when score >= threshold
  double fpr;
  double tpr;
};

struct RocResult {
  std::vector<RocPoint> curve;
  double auc = 0.0;
};

/// Threshold sweep over unique scores, bracketed by (+inf, 0, 0) and (-inf, 1, 1).
/// Tied scores share one threshold; AUC is the trapezoid area.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

enum class WilcoxonMethod { exact, normal_approx };
enum class Alternative { two_sided, greater, less };

struct WilcoxonResult {
  double statistic = 0.0;  // W+, sum of ranks of positive differences
  std::size_t n_effective = 0;
  double p_value = 1.0;
  WilcoxonMethod method = WilcoxonMethod::exact;
  Alternative alternative = Alternative::two_sided;
  bool significant_at_0_05 = false;
};

/// Largest n_effective for which the exact null distribution is used.
inline constexpr std::size_t kWilcoxonExactMax = 25;

/// Signed-rank test on a - b. Zero differences are dropped, tied |d| get
/// average ranks. `greater` tests whether a tends to exceed b.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    Alternative alt = Alternative::two_sided);

struct BoxplotSummary {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double mean = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

/// Tukey-style summary. The median is the usual middle order statistic; q1
/// and q3 are the medians of the lower and upper halves, with the middle value
/// excluded from both halves when the count is odd. Outliers lie strictly
/// beyond 1.5 IQR from the quartiles.
BoxplotSummary summarize_boxplot(std::span<const double> data);

const char* to_string(WilcoxonMethod m) noexcept;
const char* to_string(Alternative a) noexcept;

}  // namespace snore
