#include "snore/app.hpp"
#include "snore/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

using namespace snore;
using namespace snore::app;

namespace {

std::string usage_message(const std::string& text) {
  try {
    parse_config(text, "test.toml");
  } catch (const UsageError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("a seed alone is a complete config") {
  const auto cfg = parse_config("seed = 42\n");
  CHECK(cfg.seed == 42);
  CHECK(cfg.out_dir == "out");
  CHECK(cfg.jobs == 1);
  CHECK(cfg.corpus.n_snore == 100);
  CHECK(cfg.hpss.harmonic_length == 33);
  CHECK(cfg.kinds == std::vector<TfrKind>{TfrKind::cqt, TfrKind::harmonic});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
  CHECK(cfg.corpus.n_folds == 5);
  CHECK_FALSE(cfg.limited.has_value());
  CHECK_FALSE(cfg.write_png);
  CHECK_FALSE(cfg.write_checkpoints);
}

TEST_CASE("every section maps onto its fields") {
  const auto cfg = parse_config(R"(
seed = 7
out = "runs/a"
jobs = 2

[corpus]
n_snore = 12
n_interferer = 9
snr_db = [-5.0, 5.0]
n_subjects = 10
test_fraction = 0.2
interferer_kinds = ["click_train", "cough_surrogate"]
breath_noise = 0.1

[tfr]
cqt_hop = 256

[hpss]
harmonic_length = 17
mask_power = 1.0
percussive_length = 5

[train]
learning_rate = 0.002
max_epochs = 40
patience = 4

[experiment]
kinds = ["stft", "mel", "cqt", "harmonic"]
seeds = [1, 2, 3]
folds = 4
limited_snore = 30
limited_interferer = 20

[output]
png = true
checkpoints = true
)");
  CHECK(cfg.seed == 7);
  CHECK(cfg.out_dir == "runs/a");
  CHECK(cfg.jobs == 2);
  CHECK(cfg.corpus.n_snore == 12);
  CHECK(cfg.corpus.snr_list == std::vector<double>{-5.0, 5.0});
  CHECK(cfg.corpus.interferer_kinds ==
        std::vector<InterfererKind>{InterfererKind::click_train, InterfererKind::cough_surrogate});
  CHECK(cfg.corpus.breath_noise == 0.1);
  CHECK(cfg.corpus.n_folds == 4);
  CHECK(cfg.tfr.cqt_hop == 256);
  CHECK(cfg.hpss.harmonic_length == 17);
  CHECK(cfg.hpss.mask_power == 1.0);
  CHECK(cfg.hpss.percussive_length_fixed == 5);
  CHECK(cfg.train.learning_rate == 0.002);
  CHECK(cfg.train.max_epochs == 40);
  CHECK(cfg.kinds.size() == 4);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.folds == 4);
  REQUIRE(cfg.limited.has_value());
  CHECK(cfg.limited->n_snore_train == 30);
  CHECK(cfg.limited->n_interferer_train == 20);
  CHECK(cfg.write_png);
  CHECK(cfg.write_checkpoints);
}

TEST_CASE("configuration mistakes are usage errors") {
  CHECK(usage_message("out = \"x\"\n").find("seed") != std::string::npos);
  CHECK(usage_message("seed = 1\ncolour = 3\n").find("colour") != std::string::npos);
  CHECK(usage_message("seed = 1\n[hpss]\nharmonic_lenght = 33\n").find("harmonic_lenght") != std::string::npos);
  CHECK(usage_message("seed = 1\n[experiment]\nkinds = [\"wavelet\"]\n").find("wavelet") != std::string::npos);
  CHECK_FALSE(usage_message("seed = 1\n[experiment]\nlimited_snore = 90\n").empty());
  CHECK_FALSE(usage_message("seed = 1\n[hpss]\nharmonic_length = 32\n").empty());
  CHECK_FALSE(usage_message("seed = 1\n[train]\npatience = 500\n").empty());
  CHECK_FALSE(usage_message("seed = \"one\"\n").empty());
  CHECK_FALSE(usage_message("seed = -1\n").empty());
  CHECK_FALSE(usage_message("seed = 1\njobs = 0\n").empty());
  CHECK_FALSE(usage_message("seed = 1\n[corpus]\ninterferer_kinds = [\"bark\"]\n").empty());
  CHECK_FALSE(usage_message("seed = 1\n[experiment]\nfolds = 1\n").empty());
  const auto syntax = usage_message("seed = 1\n[corpus\n");
  CHECK(syntax.find("test.toml") != std::string::npos);
  CHECK(syntax.find('2') != std::string::npos);
}

TEST_CASE("configs load from disk") {
  const auto dir = std::filesystem::temp_directory_path() / ("snore_cfg_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "c.toml") << "seed = 3\n";
  CHECK(load_config(dir / "c.toml").seed == 3);
  CHECK_THROWS_AS(load_config(dir / "missing.toml"), UsageError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("exit codes follow the error family") {
  CHECK(exit_code_for(UsageError("x")) == kExitUsage);
  CHECK(exit_code_for(InvariantViolation("x")) == kExitInvariant);
  CHECK(exit_code_for(IoError("x")) == kExitRuntime);
  CHECK(exit_code_for(ParseError("x")) == kExitRuntime);
}

TEST_CASE("shipped example configs parse") {
  const std::filesystem::path dir = SNORE_SOURCE_DIR "/tools/configs";
  const auto s2 = load_config(dir / "scenario2.toml");
  CHECK(s2.corpus.n_interferer == 150);
  CHECK(s2.seeds.size() == 10);
  REQUIRE(s2.limited.has_value());
  CHECK(s2.limited->n_snore_train == 90);
  CHECK(s2.limited->n_interferer_train == 60);
  CHECK(load_config(dir / "quick.toml").kinds.size() == 4);
}
