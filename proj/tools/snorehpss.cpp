// snorehpss: corpus synthesis, feature extraction, training/evaluation,
// paired comparison and figure export for the harmonic-enhanced snore detector.

#include "snore/app.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace snore;
using namespace snore::app;

int main(int argc, char** argv) {
  CLI::App cli{"Snore detection with harmonic-enhanced constant-Q features"};
  cli.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  cli.add_option("--config", config_path, "TOML experiment configuration");
  cli.add_option("--seed", seed, "Override the corpus seed");
  cli.add_option("--out", out, "Override the output directory");
  cli.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* synth = cli.add_subcommand("synth", "Generate the synthetic corpus and manifest");

  auto* extract = cli.add_subcommand("extract", "Compute time-frequency features for every item");
  std::vector<std::string> kind_names;
  extract->add_option("--kind", kind_names, "stft, mel, cqt or harmonic (repeatable; default from config)");

  auto* train_eval = cli.add_subcommand("train-eval", "Cross-validated training and test evaluation");

  auto* compare = cli.add_subcommand("compare", "Paired Wilcoxon signed-rank test between two run reports");
  CompareOptions cmp;
  std::string report_a, report_b, alternative = "two_sided", json_out;
  compare->add_option("report_a", report_a, "runs.csv of the candidate")->required();
  compare->add_option("report_b", report_b, "runs.csv of the reference")->required();
  compare->add_option("--kind-a", cmp.kind_a, "Only rows of this kind from report_a");
  compare->add_option("--kind-b", cmp.kind_b, "Only rows of this kind from report_b");
  compare->add_option("--metric", cmp.metric, "Column to compare")->capture_default_str();
  compare->add_option("--pair-by", cmp.pair_by, "seed-fold or order")->capture_default_str();
  compare->add_option("--alternative", alternative, "two_sided, greater or less")->capture_default_str();
  compare->add_option("--json", json_out, "Also write the result as JSON");

  auto* plot = cli.add_subcommand("plot", "Render spectrogram and curve figures");
  std::string plot_clip, plot_reports, plot_dir;
  plot->add_option("--clip", plot_clip, "WAV clip to render as CQT vs harmonic-enhanced");
  plot->add_option("--reports", plot_reports, "Reports directory written by train-eval");
  plot->add_option("--figures", plot_dir, "Output directory (default <out>/figures)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return kExitUsage;
  }

  try {
    const auto config = [&](bool required) {
      ExperimentConfig cfg;
      if (!config_path.empty()) {
        cfg = load_config(config_path);
      } else if (required) {
        throw UsageError("--config is required for this command");
      }
      if (seed) cfg.seed = *seed;
      if (out) cfg.out_dir = *out;
      if (jobs) cfg.jobs = *jobs;
      return cfg;
    };

    if (*synth) return cmd_synth(config(true));
    if (*extract) {
      const auto cfg = config(true);
      std::vector<TfrKind> kinds = cfg.kinds;
      if (!kind_names.empty()) {
        kinds.clear();
        for (const auto& name : kind_names) {
          const auto k = parse_tfr_kind(name);
          if (!k) throw UsageError("unknown feature kind '" + name + "'");
          kinds.push_back(*k);
        }
      }
      return cmd_extract(cfg, kinds);
    }
    if (*train_eval) return cmd_train_eval(config(true));
    if (*compare) {
      cmp.report_a = report_a;
      cmp.report_b = report_b;
      if (alternative == "two_sided") {
        cmp.alternative = Alternative::two_sided;
      } else if (alternative == "greater") {
        cmp.alternative = Alternative::greater;
      } else if (alternative == "less") {
        cmp.alternative = Alternative::less;
      } else {
        throw UsageError("unknown alternative '" + alternative + "'");
      }
      if (!json_out.empty()) cmp.json_out = json_out;
      return cmd_compare(cmp);
    }
    if (*plot) {
      const auto cfg = config(false);
      PlotOptions opts;
      if (!plot_clip.empty()) opts.clip = plot_clip;
      if (!plot_reports.empty()) opts.reports_dir = plot_reports;
      opts.out_dir = plot_dir.empty() ? Layout{cfg.out_dir}.figures_dir() : std::filesystem::path(plot_dir);
      return cmd_plot(cfg, opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "snorehpss: error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitUsage;
}
