#pragma once

#include "snore/corpus.hpp"
#include "snore/errors.hpp"
#include "snore/experiment.hpp"
#include "snore/hpss.hpp"
#include "snore/learner.hpp"
#include "snore/tfr.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace snore::app {

/// Bad command line or configuration; maps to exit code 2.
class UsageError : public Error {
public:
  using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitInvariant = 4;

/// Everything a run needs, read from one TOML file.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  int jobs = 1;

  ManifestParams corpus;
  /// Optional directories of user recordings replacing synthesized sources.
  std::optional<std::filesystem::path> snore_wav_dir;
  std::optional<std::filesystem::path> interferer_wav_dir;

  TfrConfig tfr;
  HpssConfig hpss;
  TrainConfig train;

  std::vector<TfrKind> kinds{TfrKind::cqt, TfrKind::harmonic};
  std::vector<std::uint64_t> seeds{1};
  int folds = 5;
  std::optional<LimitedData> limited;

  bool write_png = false;
  bool write_checkpoints = false;

  void validate() const;
};

/// Parses TOML text. Unknown keys and wrong types are UsageErrors; the
/// top-level `seed` is mandatory.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Output layout under out_dir.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path corpus_dir() const { return root / "corpus"; }
  std::filesystem::path manifest() const { return corpus_dir() / "manifest.jsonl"; }
  std::filesystem::path clip(const std::string& id) const { return corpus_dir() / "clips" / (id + ".wav"); }
  std::filesystem::path feature_dir(TfrKind kind) const { return root / "features" / to_string(kind); }
  std::filesystem::path feature(TfrKind kind, const std::string& id) const {
    return feature_dir(kind) / (id + ".csv");
  }
  std::filesystem::path reports_dir() const { return root / "reports"; }
  std::filesystem::path figures_dir() const { return root / "figures"; }
};

int cmd_synth(const ExperimentConfig& cfg);
int cmd_extract(const ExperimentConfig& cfg, const std::vector<TfrKind>& kinds);
int cmd_train_eval(const ExperimentConfig& cfg);

struct CompareOptions {
  std::filesystem::path report_a;
  std::filesystem::path report_b;
  std::optional<std::string> kind_a;
  std::optional<std::string> kind_b;
  std::string metric = "acc";
  std::string pair_by = "seed-fold";
  Alternative alternative = Alternative::two_sided;
  std::optional<std::filesystem::path> json_out;
};

/// Prints statistic, p and the verdict line to stdout.
int cmd_compare(const CompareOptions& opts);

struct PlotOptions {
  std::optional<std::filesystem::path> clip;
  std::optional<std::filesystem::path> reports_dir;
  std::filesystem::path out_dir;
};

int cmd_plot(const ExperimentConfig& cfg, const PlotOptions& opts);

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace snore::app
