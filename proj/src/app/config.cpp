#include "snore/app.hpp"

#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace snore::app {

namespace {

// Typed access to one TOML table that remembers which keys were consumed so
// leftovers (typos) can be rejected.
class Section {
public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  template <typename T>
  void read(const char* key, T& dst) {
    const toml::node* node = lookup(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      dst = require(node->value<bool>(), key, "a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      const auto v = require(node->value_exact<std::int64_t>(), key, "an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v < 0) throw UsageError(where(key) + " must be non-negative");
      }
      dst = static_cast<T>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      dst = require(node->value<double>(), key, "a number");
    } else {
      dst = require(node->value<std::string>(), key, "a string");
    }
  }

  template <typename T>
  void read(const char* key, std::optional<T>& dst) {
    if (!lookup(key)) return;
    T v{};
    read(key, v);
    dst = v;
  }

  template <typename T>
  bool read_list(const char* key, std::vector<T>& dst) {
    const toml::node* node = lookup(key);
    if (!node) return false;
    const auto* arr = node->as_array();
    if (!arr) throw UsageError(where(key) + " must be an array");
    std::vector<T> out;
    for (const auto& el : *arr) {
      if constexpr (std::is_integral_v<T>) {
        const auto v = el.value_exact<std::int64_t>();
        if (!v || *v < 0) throw UsageError(where(key) + " must hold non-negative integers");
        out.push_back(static_cast<T>(*v));
      } else if constexpr (std::is_floating_point_v<T>) {
        const auto v = el.value<double>();
        if (!v) throw UsageError(where(key) + " must hold numbers");
        out.push_back(*v);
      } else {
        const auto v = el.value<std::string>();
        if (!v) throw UsageError(where(key) + " must hold strings");
        out.push_back(*v);
      }
    }
    dst = std::move(out);
    return true;
  }

  Section sub(const char* key) {
    const toml::node* node = lookup(key);
    if (!node) return {nullptr, name_ + key};
    const auto* t = node->as_table();
    if (!t) throw UsageError("[" + std::string(key) + "] must be a table");
    return {t, key};
  }

  void reject_unknown() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!seen_.count(std::string(k.str()))) throw UsageError("unknown key " + where(std::string(k.str())));
    }
  }

private:
  const toml::node* lookup(const char* key) {
    seen_.insert(key);
    return table_ ? table_->get(key) : nullptr;
  }

  std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  template <typename V>
  V require(std::optional<V> v, const char* key, const char* what) const {
    if (!v) throw UsageError(where(key) + " must be " + what);
    return *v;
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

TfrKind kind_from(const std::string& s) {
  const auto k = parse_tfr_kind(s);
  if (!k) throw UsageError("unknown feature kind '" + s + "'");
  return *k;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (jobs < 1) throw UsageError("jobs must be at least 1");
  if (out_dir.empty()) throw UsageError("output directory is empty");
  if (kinds.empty()) throw UsageError("experiment.kinds is empty");
  if (seeds.empty()) throw UsageError("experiment.seeds is empty");
  if (folds < 2) throw UsageError("experiment.folds must be at least 2");
  if (limited && (limited->n_snore_train == 0 || limited->n_interferer_train == 0)) {
    throw UsageError("limited-data counts must be positive");
  }
  try {
    corpus.validate();
    tfr.validate();
    hpss.validate();
    train.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ": " << e.description();
    throw UsageError(msg.str());
  }

  ExperimentConfig cfg;
  Section top(&root, "");
  std::optional<std::uint64_t> seed;
  top.read("seed", seed);
  if (!seed) throw UsageError(source + ": top-level 'seed' is required");
  cfg.seed = *seed;
  std::string out = cfg.out_dir.string();
  top.read("out", out);
  cfg.out_dir = out;
  top.read("jobs", cfg.jobs);

  {
    Section s = top.sub("corpus");
    auto& c = cfg.corpus;
    s.read("n_snore", c.n_snore);
    s.read("n_interferer", c.n_interferer);
    s.read_list("snr_db", c.snr_list);
    s.read("n_subjects", c.n_subjects);
    s.read("test_fraction", c.test_fraction);
    s.read("interferer_pool", c.interferer_pool);
    s.read("sample_rate", c.sample_rate);
    s.read("level_min_db", c.level_min_db);
    s.read("level_max_db", c.level_max_db);
    s.read("f0_min_hz", c.f0_min_hz);
    s.read("f0_max_hz", c.f0_max_hz);
    s.read("harmonics_min", c.harmonics_min);
    s.read("harmonics_max", c.harmonics_max);
    s.read("rolloff_min", c.rolloff_min);
    s.read("rolloff_max", c.rolloff_max);
    s.read("duration_min_s", c.duration_min_s);
    s.read("duration_max_s", c.duration_max_s);
    s.read("jitter_pct", c.jitter_pct);
    s.read("breath_noise", c.breath_noise);
    std::vector<std::string> kinds;
    if (s.read_list("interferer_kinds", kinds)) {
      c.interferer_kinds.clear();
      for (const auto& k : kinds) {
        const auto parsed = parse_interferer_kind(k);
        if (!parsed) throw UsageError("unknown interferer kind '" + k + "'");
        c.interferer_kinds.push_back(*parsed);
      }
    }
    s.read("interferer_rms", c.interferer_defaults.rms_target);
    std::optional<std::string> dir;
    s.read("snore_wav_dir", dir);
    if (dir) cfg.snore_wav_dir = *dir;
    dir.reset();
    s.read("interferer_wav_dir", dir);
    if (dir) cfg.interferer_wav_dir = *dir;
    s.reject_unknown();
  }
  {
    Section s = top.sub("tfr");
    auto& t = cfg.tfr;
    s.read("stft_window", t.stft_window);
    s.read("stft_hop", t.stft_hop);
    s.read("stft_rate", t.stft_rate);
    s.read("mel_filters", t.mel_filters);
    s.read("mel_fmin_hz", t.mel_fmin_hz);
    s.read("mel_fmax_hz", t.mel_fmax_hz);
    s.read("cqt_bins", t.cqt_bins);
    s.read("cqt_bins_per_octave", t.cqt_bins_per_octave);
    s.read("cqt_hop", t.cqt_hop);
    s.read("cqt_rate", t.cqt_rate);
    s.read("cqt_fmin_hz", t.cqt_fmin_hz);
    s.reject_unknown();
  }
  {
    Section s = top.sub("hpss");
    auto& h = cfg.hpss;
    s.read("harmonic_length", h.harmonic_length);
    s.read("mask_power", h.mask_power);
    s.read("sixteenth_rule", h.sixteenth_rule);
    s.read("percussive_length", h.percussive_length_fixed);
    s.read("percussive_length_min", h.percussive_length_min);
    s.reject_unknown();
  }
  {
    Section s = top.sub("train");
    auto& t = cfg.train;
    s.read("learning_rate", t.learning_rate);
    s.read("batch_size", t.batch_size);
    s.read("max_epochs", t.max_epochs);
    s.read("patience", t.patience);
    s.read("adam_beta1", t.adam_beta1);
    s.read("adam_beta2", t.adam_beta2);
    s.read("adam_eps", t.adam_eps);
    s.reject_unknown();
  }
  {
    Section s = top.sub("experiment");
    std::vector<std::string> kinds;
    if (s.read_list("kinds", kinds)) {
      cfg.kinds.clear();
      for (const auto& k : kinds) cfg.kinds.push_back(kind_from(k));
    }
    s.read_list("seeds", cfg.seeds);
    s.read("folds", cfg.folds);
    std::optional<std::size_t> ls, li;
    s.read("limited_snore", ls);
    s.read("limited_interferer", li);
    if (ls.has_value() != li.has_value()) {
      throw UsageError("experiment.limited_snore and limited_interferer must be given together");
    }
    if (ls) cfg.limited = LimitedData{*ls, *li};
    s.reject_unknown();
  }
  {
    Section s = top.sub("output");
    s.read("png", cfg.write_png);
    s.read("checkpoints", cfg.write_checkpoints);
    s.reject_unknown();
  }
  top.reject_unknown();
  cfg.corpus.n_folds = cfg.folds;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

}  // namespace snore::app
