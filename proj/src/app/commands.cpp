#include "snore/app.hpp"

#include "snore/audio_io.hpp"
#include "snore/export.hpp"
#include "snore/parallel.hpp"

#include <json.hpp>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace snore::app {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void log(const char* cmd, const std::string& msg) { std::cerr << "snorehpss " << cmd << ": " << msg << '\n'; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

// Advisory lock on the output directory, released on scope exit.
class DirLock {
public:
  explicit DirLock(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const auto path = dir / ".snorehpss.lock";
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw IoError("another snorehpss run holds " + path.string());
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

private:
  int fd_ = -1;
};

std::vector<std::string> wav_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(fs::absolute(e.path()).string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw UsageError("no .wav files in " + dir.string());
  return out;
}

// Replaces synthesized sources by user recordings, cycling through the sorted
// file list. Mixtures sharing a snore recipe keep sharing one file.
void attach_recordings(CorpusManifest& m, const ExperimentConfig& cfg) {
  if (cfg.snore_wav_dir) {
    const auto files = wav_files(*cfg.snore_wav_dir);
    std::map<std::uint64_t, std::string> by_seed;
    for (auto& item : m.items) {
      if (!item.snore) continue;
      auto [it, fresh] = by_seed.try_emplace(item.snore->seed);
      if (fresh) it->second = files[(by_seed.size() - 1) % files.size()];
      item.snore->wav_path = it->second;
    }
  }
  if (cfg.interferer_wav_dir) {
    const auto files = wav_files(*cfg.interferer_wav_dir);
    std::size_t next = 0;
    for (auto& item : m.items) item.interferer.wav_path = files[next++ % files.size()];
  }
}

CorpusManifest load_manifest(const Layout& layout) {
  if (!fs::exists(layout.manifest())) throw IoError("no manifest at " + layout.manifest().string() + "; run synth");
  return read_manifest(layout.manifest());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) make_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string run_stem(const RunRecord& r) {
  return std::string(to_string(r.kind)) + "_seed" + std::to_string(r.seed) + "_fold" + std::to_string(r.fold);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const fs::path& src) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw UsageError(src.string() + " has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV " + path.string());
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_csv_line(line);
    if (row.size() != t.header.size()) throw ParseError("ragged row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

double parse_double(const std::string& s, const fs::path& src) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError("bad number '" + s + "' in " + src.string());
}

}  // namespace

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const InvariantViolation*>(&e)) return kExitInvariant;
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  return kExitRuntime;
}

int cmd_synth(const ExperimentConfig& cfg) {
  const Layout layout{cfg.out_dir};
  DirLock lock(cfg.out_dir);
  CorpusManifest m = build_manifest(cfg.corpus, cfg.seed);
  attach_recordings(m, cfg);
  check_manifest(m);
  make_directories(layout.corpus_dir() / "clips");
  parallel_for(m.items.size(), cfg.jobs, [&](std::size_t i) {
    auto clip = render_item(m.items[i], m.params);
    save_wav(layout.clip(m.items[i].id), clip);
  });
  write_manifest(layout.manifest(), m);
  log("synth", "wrote " + std::to_string(m.items.size()) + " items to " + layout.corpus_dir().string());
  return kExitOk;
}

int cmd_extract(const ExperimentConfig& cfg, const std::vector<TfrKind>& kinds) {
  if (kinds.empty()) throw UsageError("no feature kinds requested");
  const Layout layout{cfg.out_dir};
  DirLock lock(cfg.out_dir);
  const auto m = load_manifest(layout);

  std::vector<std::string> missing;
  for (const auto& item : m.items) {
    if (!fs::exists(layout.clip(item.id))) missing.push_back(item.id);
  }
  if (!missing.empty()) {
    for (const auto& id : missing) log("extract", "missing clip " + layout.clip(id).string());
    throw IoError(std::to_string(missing.size()) + " of " + std::to_string(m.items.size()) + " clips missing");
  }
  for (auto k : kinds) make_directories(layout.feature_dir(k));

  const auto wants = [&](TfrKind k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };
  parallel_for(m.items.size(), cfg.jobs, [&](std::size_t i) {
    const auto& id = m.items[i].id;
    const auto clip = load_wav(layout.clip(id));
    const auto emit = [&](TfrKind k, const Spectrogram& s) {
      write_spectrogram_csv(layout.feature(k, id), s);
      if (cfg.write_png) write_spectrogram_png(layout.feature_dir(k) / (id + ".png"), s.values);
    };
    if (wants(TfrKind::stft) || wants(TfrKind::mel)) {
      const auto low = clip.sample_rate == cfg.tfr.stft_rate ? clip : resample(clip, cfg.tfr.stft_rate);
      const auto stft = stft_magnitude(low, cfg.tfr);
      if (wants(TfrKind::stft)) emit(TfrKind::stft, stft);
      if (wants(TfrKind::mel)) emit(TfrKind::mel, mel_spectrogram(stft, cfg.tfr));
    }
    if (wants(TfrKind::cqt) || wants(TfrKind::harmonic)) {
      const auto high = clip.sample_rate == cfg.tfr.cqt_rate ? clip : resample(clip, cfg.tfr.cqt_rate);
      const auto cqt = cqt_magnitude(high, cfg.tfr);
      if (wants(TfrKind::cqt)) emit(TfrKind::cqt, cqt);
      if (wants(TfrKind::harmonic)) {
        const auto res = hpss_separate(cqt, cfg.hpss);
        emit(TfrKind::harmonic, res.enhanced);
        const auto dir = layout.feature_dir(TfrKind::harmonic);
        write_matrix_csv(dir / (id + ".mask.csv"), res.mask, res.enhanced);
        json side{{"id", id},
                  {"harmonic_length", cfg.hpss.harmonic_length},
                  {"mask_power", cfg.hpss.mask_power},
                  {"percussive_lengths", res.percussive_lengths},
                  {"bins", res.enhanced.bins()},
                  {"frames", res.enhanced.frames()}};
        write_text(dir / (id + ".json"), side.dump(2) + "\n");
      }
    }
  });
  std::string names;
  for (auto k : kinds) names += std::string(names.empty() ? "" : ",") + to_string(k);
  log("extract", "wrote " + names + " features for " + std::to_string(m.items.size()) + " items");
  return kExitOk;
}

int cmd_train_eval(const ExperimentConfig& cfg) {
  const Layout layout{cfg.out_dir};
  DirLock lock(cfg.out_dir);
  const auto m = load_manifest(layout);

  std::vector<std::pair<std::string, TfrKind>> wanted;
  for (auto k : cfg.kinds) {
    for (const auto& item : m.items) wanted.emplace_back(item.id, k);
  }
  std::vector<std::string> missing;
  for (const auto& [id, k] : wanted) {
    if (!fs::exists(layout.feature(k, id))) missing.push_back(layout.feature(k, id).string());
  }
  if (!missing.empty()) {
    for (const auto& p : missing) log("train-eval", "missing features " + p);
    throw IoError(std::to_string(missing.size()) + " feature files missing; run extract");
  }
  std::vector<FeatureTensor> tensors(wanted.size());
  parallel_for(wanted.size(), cfg.jobs, [&](std::size_t i) {
    const auto k = wanted[i].second;
    const int rate = (k == TfrKind::stft || k == TfrKind::mel) ? cfg.tfr.stft_rate : cfg.tfr.cqt_rate;
    tensors[i] = featurize(read_spectrogram_csv(layout.feature(k, wanted[i].first), k, rate));
  });
  FeatureBank bank;
  for (std::size_t i = 0; i < wanted.size(); ++i) bank.put(wanted[i].first, std::move(tensors[i]));

  ExperimentPlan plan;
  plan.kinds = cfg.kinds;
  plan.seeds = cfg.seeds;
  plan.folds = cfg.folds;
  plan.limited = cfg.limited;
  plan.train = cfg.train;
  plan.jobs = cfg.jobs;
  plan.keep_models = cfg.write_checkpoints;
  log("train-eval", std::to_string(plan.kinds.size() * plan.seeds.size() * plan.folds) + " runs");
  const auto records = run_experiment(m, bank, plan);

  const auto dir = layout.reports_dir();
  make_directories(dir / "curves");
  make_directories(dir / "roc");
  std::ostringstream runs;
  runs << "kind,seed,fold,tp,tn,fp,fn,acc,sen,spe,prec,sco,f1,auc,best_epoch,stopped_epoch,n_train,n_validation\n";
  for (const auto& r : records) {
    const auto& c = r.metrics.counts;
    runs << to_string(r.kind) << ',' << r.seed << ',' << r.fold << ',' << c.tp << ',' << c.tn << ',' << c.fp << ','
         << c.fn << ',' << opt_num(r.metrics.acc) << ',' << opt_num(r.metrics.sen) << ','
         << opt_num(r.metrics.spe) << ',' << opt_num(r.metrics.prec) << ',' << opt_num(r.metrics.sco) << ','
         << opt_num(r.metrics.f1) << ',' << opt_num(r.metrics.auc) << ',' << r.train.best_epoch << ','
         << r.train.stopped_epoch << ',' << r.train_items.size() << ',' << r.validation_items.size() << '\n';
    write_train_report_csv(dir / "curves" / (run_stem(r) + ".csv"), r.train);
    if (r.metrics.auc) write_roc_csv(dir / "roc" / (run_stem(r) + ".csv"), roc_auc(r.scores, r.labels));
  }
  write_text(dir / "runs.csv", runs.str());

  const auto opt_json = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json runs_json = json::array();
  for (const auto& r : records) {
    const auto& c = r.metrics.counts;
    runs_json.push_back({{"kind", to_string(r.kind)},
                         {"seed", r.seed},
                         {"fold", r.fold},
                         {"counts", {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}}},
                         {"acc", opt_json(r.metrics.acc)},
                         {"sen", opt_json(r.metrics.sen)},
                         {"spe", opt_json(r.metrics.spe)},
                         {"prec", opt_json(r.metrics.prec)},
                         {"sco", opt_json(r.metrics.sco)},
                         {"f1", opt_json(r.metrics.f1)},
                         {"auc", opt_json(r.metrics.auc)},
                         {"best_epoch", r.train.best_epoch},
                         {"stopped_epoch", r.train.stopped_epoch}});
    if (r.model) write_checkpoint(dir / "models" / (run_stem(r) + ".json"), *r.model);
  }
  write_text(dir / "runs.json", runs_json.dump(2) + "\n");

  json summary{{"seed", cfg.seed}, {"folds", cfg.folds}, {"seeds", cfg.seeds}, {"kinds", json::object()}};
  std::ostringstream agg;
  agg << "kind,n,mean_acc,median_acc,q1_acc,q3_acc,mean_auc\n";
  for (auto k : cfg.kinds) {
    const auto acc = accuracies(records, k);
    const auto auc = aucs(records, k);
    const double mean_auc =
        auc.empty() ? std::nan("") : std::accumulate(auc.begin(), auc.end(), 0.0) / static_cast<double>(auc.size());
    json entry{{"runs", acc.size()}, {"accuracy", acc}, {"auc", auc}};
    if (!auc.empty()) entry["mean_auc"] = mean_auc;
    agg << to_string(k) << ',' << acc.size();
    if (acc.size() >= 4) {
      const auto box = summarize_boxplot(acc);
      entry["boxplot"] = {{"q1", box.q1},         {"median", box.median},     {"q3", box.q3},
                          {"mean", box.mean},     {"whisker_low", box.whisker_low},
                          {"whisker_high", box.whisker_high}, {"outliers", box.outliers}};
      agg << ',' << num(box.mean) << ',' << num(box.median) << ',' << num(box.q1) << ',' << num(box.q3);
    } else {
      const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
      entry["mean_accuracy"] = mean;
      agg << ',' << num(mean) << ",,,";
    }
    agg << ',' << (auc.empty() ? std::string() : num(mean_auc)) << '\n';
    summary["kinds"][to_string(k)] = entry;
  }
  if (cfg.kinds.size() >= 2) {
    // The last kind is the candidate, the first the reference (e.g. cqt then harmonic).
    const auto a = accuracies(records, cfg.kinds.back());
    const auto b = accuracies(records, cfg.kinds.front());
    json cmp{{"candidate", to_string(cfg.kinds.back())}, {"reference", to_string(cfg.kinds.front())}};
    try {
      const auto w = wilcoxon_signed_rank(a, b, Alternative::greater);
      cmp["statistic"] = w.statistic;
      cmp["n_effective"] = w.n_effective;
      cmp["p_value_greater"] = w.p_value;
      cmp["method"] = to_string(w.method);
    } catch (const DegenerateError&) {
      cmp["p_value_greater"] = nullptr;
      cmp["note"] = "all paired accuracy differences are zero";
    }
    summary["comparison"] = cmp;
  }
  write_text(dir / "summary.csv", agg.str());
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  log("train-eval", "reports in " + dir.string());
  return kExitOk;
}

int cmd_compare(const CompareOptions& opts) {
  if (opts.pair_by != "seed-fold" && opts.pair_by != "order") {
    throw UsageError("--pair-by must be seed-fold or order, got '" + opts.pair_by + "'");
  }
  struct Row {
    std::string seed;
    std::string fold;
    double value;
  };
  const auto load = [&](const fs::path& path, const std::optional<std::string>& kind) {
    const auto t = read_csv(path);
    const auto ci = t.column(opts.metric, path);
    const auto si = t.column("seed", path);
    const auto fi = t.column("fold", path);
    const auto ki = t.column("kind", path);
    std::vector<Row> rows;
    for (const auto& r : t.rows) {
      if (kind && r[ki] != *kind) continue;
      if (r[ci].empty()) throw UsageError(path.string() + ": undefined " + opts.metric + " in a run");
      rows.push_back({r[si], r[fi], parse_double(r[ci], path)});
    }
    if (rows.empty()) throw UsageError(path.string() + " has no matching runs");
    return rows;
  };
  auto ra = load(opts.report_a, opts.kind_a);
  auto rb = load(opts.report_b, opts.kind_b);
  if (ra.size() != rb.size()) {
    throw UsageError("reports hold " + std::to_string(ra.size()) + " and " + std::to_string(rb.size()) + " runs");
  }
  const auto key = [](const Row& r) { return r.seed + "/" + r.fold; };
  if (opts.pair_by == "seed-fold") {
    const auto by_key = [&](const Row& x, const Row& y) { return key(x) < key(y); };
    std::sort(ra.begin(), ra.end(), by_key);
    std::sort(rb.begin(), rb.end(), by_key);
  }
  std::vector<double> a, b;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (key(ra[i]) != key(rb[i])) {
      throw UsageError("run " + key(ra[i]) + " has no partner (found " + key(rb[i]) + ") under --pair-by " +
                       opts.pair_by);
    }
    a.push_back(ra[i].value);
    b.push_back(rb[i].value);
  }
  WilcoxonResult w;
  try {
    w = wilcoxon_signed_rank(a, b, opts.alternative);
  } catch (const DegenerateError& e) {
    throw UsageError(std::string("cannot compare: ") + e.what());
  } catch (const MismatchError& e) {
    throw UsageError(e.what());
  }
  const double diff = std::accumulate(a.begin(), a.end(), 0.0) - std::accumulate(b.begin(), b.end(), 0.0);
  const bool better = w.p_value < 0.05 && diff > 0.0;
  std::cout << "statistic " << num(w.statistic) << " n " << w.n_effective << " method " << to_string(w.method)
            << " alternative " << to_string(w.alternative) << '\n'
            << "p " << num(w.p_value) << '\n'
            << "significantly better: " << (better ? "yes" : "no") << '\n';
  if (opts.json_out) {
    json j{{"statistic", w.statistic},       {"n_effective", w.n_effective},
           {"p_value", w.p_value},           {"method", to_string(w.method)},
           {"alternative", to_string(w.alternative)}, {"metric", opts.metric},
           {"significantly_better", better}};
    write_text(*opts.json_out, j.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_plot(const ExperimentConfig& cfg, const PlotOptions& opts) {
  if (!opts.clip && !opts.reports_dir) throw UsageError("plot needs --clip and/or --reports");
  if (opts.clip && !fs::exists(*opts.clip)) throw IoError("cannot read " + opts.clip->string());
  if (opts.reports_dir && !fs::is_directory(*opts.reports_dir)) throw IoError("cannot read " + opts.reports_dir->string());
  make_directories(opts.out_dir);
  if (opts.clip) {
    const auto clip = load_wav(*opts.clip);
    const auto high = clip.sample_rate == cfg.tfr.cqt_rate ? clip : resample(clip, cfg.tfr.cqt_rate);
    const auto cqt = cqt_magnitude(high, cfg.tfr);
    const auto res = hpss_separate(cqt, cfg.hpss);
    const auto stem = opts.clip->stem().string();
    const auto& harm = res.enhanced;
    write_spectrogram_png(opts.out_dir / (stem + "_cqt.png"), cqt.values);
    write_spectrogram_png(opts.out_dir / (stem + "_harmonic.png"), harm.values);
    write_side_by_side_png(opts.out_dir / (stem + "_cqt_vs_harmonic.png"), cqt.values, harm.values);
    write_spectrogram_csv(opts.out_dir / (stem + "_cqt.csv"), cqt);
    write_spectrogram_csv(opts.out_dir / (stem + "_harmonic.csv"), harm);
    // The full separation: median-filtered H and P, and the mask.
    write_spectrogram_csv(opts.out_dir / (stem + "_hpss_h.csv"), res.harmonic);
    write_spectrogram_csv(opts.out_dir / (stem + "_hpss_p.csv"), res.percussive);
    write_matrix_csv(opts.out_dir / (stem + "_hpss_mask.csv"), res.mask, cqt);
    write_spectrogram_png(opts.out_dir / (stem + "_hpss_h.png"), res.harmonic.values);
    write_spectrogram_png(opts.out_dir / (stem + "_hpss_p.png"), res.percussive.values);
    write_mask_png(opts.out_dir / (stem + "_hpss_mask.png"), res.mask);
    json side{{"clip", opts.clip->filename().string()},
              {"harmonic_length", cfg.hpss.harmonic_length},
              {"mask_power", cfg.hpss.mask_power},
              {"percussive_lengths", res.percussive_lengths}};
    write_text(opts.out_dir / (stem + "_hpss.json"), side.dump(2) + "\n");
  }
  if (opts.reports_dir) {
    const auto& dir = *opts.reports_dir;
    const auto sorted_csvs = [](const fs::path& d) {
      std::vector<fs::path> out;
      if (!fs::is_directory(d)) return out;
      for (const auto& e : fs::directory_iterator(d)) {
        if (e.path().extension() == ".csv") out.push_back(e.path());
      }
      std::sort(out.begin(), out.end());
      return out;
    };
    for (const auto& p : sorted_csvs(dir / "curves")) {
      const auto t = read_csv(p);
      const auto ei = t.column("epoch", p);
      std::vector<double> x;
      std::vector<double> tl, vl, ta, va;
      for (const auto& r : t.rows) {
        x.push_back(parse_double(r[ei], p));
        tl.push_back(parse_double(r[t.column("train_loss", p)], p));
        vl.push_back(parse_double(r[t.column("val_loss", p)], p));
        ta.push_back(parse_double(r[t.column("train_acc", p)], p));
        va.push_back(parse_double(r[t.column("val_acc", p)], p));
      }
      write_line_plot_png(opts.out_dir / (p.stem().string() + "_loss.png"), {x, x}, {tl, vl});
      write_line_plot_png(opts.out_dir / (p.stem().string() + "_accuracy.png"), {x, x}, {ta, va});
    }
    for (const auto& p : sorted_csvs(dir / "roc")) {
      const auto t = read_csv(p);
      std::vector<double> fpr, tpr;
      for (const auto& r : t.rows) {
        fpr.push_back(parse_double(r[t.column("fpr", p)], p));
        tpr.push_back(parse_double(r[t.column("tpr", p)], p));
      }
      write_line_plot_png(opts.out_dir / (p.stem().string() + "_roc.png"), {fpr, {0.0, 1.0}}, {tpr, {0.0, 1.0}});
    }
  }
  log("plot", "figures in " + opts.out_dir.string());
  return kExitOk;
}

}  // namespace snore::app
