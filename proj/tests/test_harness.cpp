#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sernas/harness/experiment.hpp"

using namespace sernas;
using namespace sernas::harness;

namespace {

std::string toy_config_text(const std::string& strategy, int n_utts = 60,
                            int epochs = 2) {
  std::ostringstream os;
  os << R"({
  "family": "custom",
  "strategy": ")" << strategy << R"(",
  "k": 1,
  "epochs_search": )" << epochs << R"(,
  "epochs_retrain": )" << epochs << R"(,
  "batch_size": 8,
  "seeds": [1],
  "probe_interval": 5,
  "dataset": {"source": "synthetic", "n_utterances": )" << n_utts << R"(, "seed": 7},
  "frontend": {"window_ms": 16, "shift_ms": 32, "dft_len": 256},
  "search_space": {
    "custom_stages": [
      {"type": "conv", "c_out": 4, "kernels": [[1,5],[2,5],[4,5]]},
      {"type": "pool", "window": [1,2]},
      {"type": "conv", "c_out": 8, "kernels": [[1,4],[2,3],[3,3]]},
      {"type": "pool", "window": [2,2]}
    ]
  }
})";
  return os.str();
}

std::filesystem::path tmpdir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / "sernas_harness" / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

// ----------------------------------------------------------------- config

TEST_CASE("config: minimal file resolves the documented defaults") {
  auto cfg = parse_config_text(R"({"family": "cnn_rnn_att", "strategy": "dropout"})");
  CHECK(cfg.epochs_search == 60);
  CHECK(cfg.epochs_retrain == 20);
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.k == 1);
  CHECK(cfg.random_candidates == 5);
  CHECK(cfg.arch_lr == 1e-3);
  CHECK(cfg.schedule.rates == std::vector<double>{1e-3, 5e-4, 2e-4, 1e-4});
  CHECK(cfg.schedule.warm_epochs == 3);
  CHECK(cfg.space.pair_kernels.size() == 6);   // full search sets
  CHECK(cfg.space.head_widths == std::vector<int>{32, 48, 64, 80});
  CHECK(cfg.frontend.dft_len == 1600);
}

TEST_CASE("config: baseline strategy defaults to the fixed ops") {
  auto cfg = parse_config_text(R"({"family": "cnn_seqcap", "strategy": "none"})");
  CHECK(cfg.space.pair_kernels == search::KernelList{{2, 8}});
  CHECK(cfg.space.conv3_kernels == search::KernelList{{5, 5}});
  CHECK(cfg.space.head_widths == std::vector<int>{64});
}

TEST_CASE("config: k equal to the candidate count is rejected") {
  CHECK_THROWS_WITH_AS(
      parse_config_text(
          R"({"family": "cnn_rnn_att", "strategy": "dropout", "k": 6})"),
      doctest::Contains("k=6"), std::invalid_argument);
}

TEST_CASE("config: unknown fields are rejected with their path") {
  CHECK_THROWS_WITH_AS(
      parse_config_text(R"({"family": "custom", "bogus_field": 1})"),
      doctest::Contains("bogus_field"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_config_text(
          R"({"family": "cnn_rnn_att", "schedule": {"warm_epochs": 3, "oops": 1}})"),
      doctest::Contains("schedule.oops"), std::invalid_argument);
}

TEST_CASE("config: parse(emit(config)) round-trips") {
  auto cfg = parse_config_text(toy_config_text("dropout"));
  auto emitted = emit_config(cfg);
  auto reparsed = parse_config_text(emitted);
  CHECK(config_equal(cfg, reparsed));
  CHECK(emit_config(reparsed) == emitted);
}

// ---------------------------------------------------------------- metrics

TEST_CASE("metrics: all correct gives WA = UA = 1") {
  auto m = compute_metrics({0, 1, 2, 3}, {0, 1, 2, 3}, 4);
  CHECK(m.wa == 1.0);
  CHECK(m.ua == 1.0);
}

TEST_CASE("metrics: hand-counted WA and UA") {
  // labels AAAAB, 3 of A correct, B correct
  auto m = compute_metrics({0, 0, 0, 1, 1}, {0, 0, 0, 0, 1}, 2);
  CHECK(m.wa == doctest::Approx(0.8));
  CHECK(m.ua == doctest::Approx(0.875));
}

TEST_CASE("metrics: absent class is excluded from UA") {
  auto m = compute_metrics({0, 1}, {0, 1}, 4);
  CHECK(m.ua == 1.0);
  CHECK(m.per_class[2] == -1.0);
}

TEST_CASE("metrics: length mismatch rejected") {
  CHECK_THROWS_AS(compute_metrics({0, 1}, {0}, 2), std::invalid_argument);
}

TEST_CASE("metrics: confusion row sums equal class support") {
  auto m = compute_metrics({0, 1, 1, 2, 0, 3}, {0, 1, 2, 2, 1, 3}, 4);
  std::vector<int> support(4, 0);
  for (int l : {0, 1, 2, 2, 1, 3}) support[l]++;
  for (int c = 0; c < 4; ++c) {
    int row = 0;
    for (int p = 0; p < 4; ++p) row += m.confusion[c][p];
    CHECK(row == support[c]);
  }
}

// ------------------------------------------------------------------ folds

TEST_CASE("folds: 10 speakers in 5 sessions give five 8/1/1 splits") {
  audio::SynthConfig sc;
  sc.n_utterances = 80;
  auto utts = audio::synth_dataset(sc, RngStream(3, "dataset"));
  auto plans = make_fold_plans(utts);
  REQUIRE(plans.size() == 5);
  std::set<int> val_seen, test_seen;
  for (const auto& p : plans) {
    CHECK(p.train_speakers.size() == 8);
    std::set<int> all(p.train_speakers.begin(), p.train_speakers.end());
    CHECK(all.size() == 8);
    CHECK_FALSE(all.count(p.val_speaker));
    CHECK_FALSE(all.count(p.test_speaker));
    CHECK(p.val_speaker != p.test_speaker);
    // held-out speakers share a session
    CHECK(p.val_speaker / 2 == p.test_speaker / 2);
    all.insert(p.val_speaker);
    all.insert(p.test_speaker);
    CHECK(all.size() == 10);  // coverage
    val_seen.insert(p.val_speaker);
    test_seen.insert(p.test_speaker);
  }
  CHECK(val_seen.size() == 5);
  CHECK(test_seen.size() == 5);
}

TEST_CASE("folds: fewer than five sessions rejected") {
  audio::SynthConfig sc;
  sc.n_utterances = 24;
  auto utts = audio::synth_dataset(sc, RngStream(4, "dataset"));
  for (auto& u : utts) u.session = u.session % 3;  // collapse sessions
  CHECK_THROWS_AS(make_fold_plans(utts), std::invalid_argument);
}

// ------------------------------------------------------------- experiment

TEST_CASE("experiment: degenerate single-candidate space runs end to end") {
  auto cfg = parse_config_text(R"({
    "family": "custom", "strategy": "none",
    "epochs_retrain": 2, "batch_size": 8, "seeds": [5],
    "dataset": {"source": "synthetic", "n_utterances": 40, "seed": 11},
    "frontend": {"window_ms": 16, "shift_ms": 32, "dft_len": 256},
    "search_space": {"custom_stages": [
      {"type": "conv", "c_out": 4, "kernels": [[2,5]]},
      {"type": "pool", "window": [2,2]}
    ]}
  })");
  auto dir = tmpdir("baseline");
  auto rep = run_experiment(cfg, dir.string(), /*only_fold=*/0);
  CHECK(rep["runs"] == 1);
  CHECK(rep["per_fold"][0]["arch"].size() == 1);
  CHECK(std::filesystem::exists(dir / "config_resolved.json"));
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "fold0" / "seed5" / "arch.txt"));
}

TEST_CASE("experiment: deterministic aggregate report across two runs") {
  auto cfg = parse_config_text(toy_config_text("dropout", 40, 1));
  auto d1 = tmpdir("det1"), d2 = tmpdir("det2");
  run_experiment(cfg, d1.string(), 0);
  run_experiment(cfg, d2.string(), 0);
  CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));
  CHECK(slurp(d1 / "fold0" / "seed1" / "arch.txt") ==
        slurp(d2 / "fold0" / "seed1" / "arch.txt"));
}

TEST_CASE("experiment: reported params match the emitted architecture doc") {
  auto cfg = parse_config_text(toy_config_text("joint", 40, 1));
  auto dir = tmpdir("params");
  auto rep = run_experiment(cfg, dir.string(), 0);
  auto arch = search::read_arch((dir / "fold0" / "seed1" / "arch.txt").string());
  CHECK(rep["per_fold"][0]["params"].get<int64_t>() == arch.param_count);
}

TEST_CASE("experiment: test-fold data cannot influence search or training") {
  auto cfg = parse_config_text(toy_config_text("dropout", 40, 1));
  auto utts = load_dataset(cfg);
  auto plans = make_fold_plans(utts);

  // perturb every test-speaker waveform
  auto perturbed = utts;
  for (auto& u : perturbed)
    if (u.speaker == plans[0].test_speaker)
      for (auto& s : u.samples) s *= 0.37f;

  auto fold_base = prepare_fold(utts, plans[0], cfg);
  auto fold_alt = prepare_fold(perturbed, plans[0], cfg);

  // the perturbation is material: test features differ...
  CHECK(fold_base.test.utterances[0].mag != fold_alt.test.utterances[0].mag);
  // ...but normalization stats come from training speakers only
  CHECK(fold_base.stats_fingerprint == fold_alt.stats_fingerprint);

  auto base = run_single<float>(cfg, fold_base, 1, "");
  auto alt = run_single<float>(cfg, fold_alt, 1, "");
  CHECK(base.arch.choice == alt.arch.choice);  // same derived architecture
  CHECK(base.best_val_wa == alt.best_val_wa);  // training untouched
}

TEST_CASE("experiment: aggregate WA consistent with stored confusion matrices") {
  auto cfg = parse_config_text(toy_config_text("sampling", 48, 1));
  cfg.seeds = {1, 2};
  auto dir = tmpdir("agg");
  auto rep = run_experiment(cfg, dir.string(), 0);
  double wa_sum = 0;
  for (const auto& e : rep["per_fold"]) {
    const auto& conf = e["metrics"]["confusion"];
    int correct = 0, total = 0;
    for (size_t c = 0; c < conf.size(); ++c)
      for (size_t p = 0; p < conf[c].size(); ++p) {
        total += conf[c][p].get<int>();
        if (c == p) correct += conf[c][p].get<int>();
      }
    const double wa = static_cast<double>(correct) / total;
    CHECK(wa == doctest::Approx(e["metrics"]["wa"].get<double>()));
    wa_sum += wa;
  }
  CHECK(rep["wa_mean"].get<double>() ==
        doctest::Approx(wa_sum / rep["per_fold"].size()));
}

TEST_CASE("experiment: worker pool gives the same report as serial execution") {
  auto cfg = parse_config_text(toy_config_text("sampling", 40, 1));
  cfg.seeds = {1, 2, 3};
  cfg.workers = 1;
  auto d1 = tmpdir("serial");
  run_experiment(cfg, d1.string(), 0);
  cfg.workers = 3;
  auto d2 = tmpdir("parallel");
  run_experiment(cfg, d2.string(), 0);
  CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));
}
