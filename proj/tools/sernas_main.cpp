// Command-line surface: experiment subcommands over a JSON config.
//
//   sernas synth-data    --config C --out-dir D        write WAVs + manifest
//   sernas baseline      --config C [--seed S] ...     fixed architecture
//   sernas search        --config C ...                joint/sampling/dropout
//   sernas random-search --config C ...                best of N random archs
//   sernas retrain       --config C --arch F ...       retrain an arch doc
//   sernas report        --out-dir D                   re-aggregate run dirs

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sernas/harness/experiment.hpp"
#include "sernas/search/derive.hpp"

using namespace sernas;
namespace fs = std::filesystem;

namespace {

struct GlobalOpts {
  std::string config;
  std::string out_dir;
  long long seed = -1;
  int fold = -1;
  int precision = 0;
};

void add_common(CLI::App* cmd, GlobalOpts& g, bool need_config = true) {
  auto* c = cmd->add_option("--config", g.config, "experiment config (JSON)");
  if (need_config) c->required();
  cmd->add_option("--out-dir", g.out_dir, "output directory");
  cmd->add_option("--seed", g.seed, "override the config seed list with one seed");
  cmd->add_option("--fold", g.fold, "restrict to a single fold index");
  cmd->add_option("--precision", g.precision, "override precision (32 or 64)")
      ->check(CLI::IsMember({32, 64}));
}

harness::ExperimentConfig load(const GlobalOpts& g) {
  auto cfg = harness::parse_config(g.config);
  if (g.seed >= 0) cfg.seeds = {static_cast<uint64_t>(g.seed)};
  if (g.precision != 0) cfg.precision = g.precision;
  return cfg;
}

int run_strategy(const GlobalOpts& g, const std::set<std::string>& allowed) {
  auto cfg = load(g);
  if (!allowed.count(cfg.strategy)) {
    std::string want;
    for (const auto& s : allowed) want += (want.empty() ? "" : "|") + s;
    std::cerr << "config strategy '" << cfg.strategy << "' does not match this "
              << "subcommand (expected " << want << ")\n";
    return 2;
  }
  auto rep = harness::run_experiment(cfg, g.out_dir, g.fold);
  std::cout << rep.dump(2) << "\n";
  return 0;
}

int do_synth_data(const GlobalOpts& g) {
  auto cfg = load(g);
  if (g.out_dir.empty()) {
    std::cerr << "synth-data needs --out-dir\n";
    return 2;
  }
  fs::create_directories(g.out_dir);
  auto utts = harness::load_dataset(cfg);
  std::vector<std::string> paths;
  for (const auto& u : utts) {
    auto p = u.id + ".wav";
    audio::write_wav(g.out_dir + "/" + p, u.samples, u.sample_rate);
    paths.push_back(p);
  }
  audio::write_manifest(g.out_dir + "/manifest.csv", paths, utts);
  std::cout << "wrote " << utts.size() << " utterances and manifest.csv to "
            << g.out_dir << "\n";
  return 0;
}

int do_retrain(const GlobalOpts& g, const std::string& arch_path) {
  auto cfg = load(g);
  auto arch = search::read_arch(arch_path);

  auto utts = harness::load_dataset(cfg);
  auto plans = harness::make_fold_plans(utts);
  nlohmann::json per_fold = nlohmann::json::array();
  for (const auto& plan : plans) {
    if (g.fold >= 0 && plan.fold != g.fold) continue;
    auto fold = harness::prepare_fold(utts, plan, cfg);
    auto dispatch = [&](auto tag) {
      using T = decltype(tag);
      auto net = search::build_supernet<T>(cfg.space, fold.freq_bins,
                                           RngStream(cfg.seeds[0], "arch_map"));
      auto opt = harness::detail::retrain_options(cfg);
      auto collapsed = search::collapse_spec(*net, arch);
      auto res = train::retrain_selected<T>(
          collapsed, fold.freq_bins, fold.train, fold.val, opt,
          RngStream(cfg.seeds[0], "run/fold" + std::to_string(plan.fold))
              .split("retrain"));
      search::ForwardSpec<T> fs;
      auto m = train::evaluate(*res.model, fold.test, fs);
      nlohmann::json e;
      e["fold"] = plan.fold;
      e["wa"] = m.wa;
      e["ua"] = m.ua;
      e["best_val_wa"] = res.best_val_wa;
      per_fold.push_back(std::move(e));
    };
    if (cfg.precision == 64)
      dispatch(double{});
    else
      dispatch(float{});
  }
  std::cout << per_fold.dump(2) << "\n";
  return 0;
}

int do_report(const GlobalOpts& g) {
  if (g.out_dir.empty()) {
    std::cerr << "report needs --out-dir\n";
    return 2;
  }
  const auto path = fs::path(g.out_dir) / "report.json";
  if (!fs::exists(path)) {
    std::cerr << "no report.json under " << g.out_dir << "\n";
    return 2;
  }
  std::ifstream f(path);
  nlohmann::json rep = nlohmann::json::parse(f);
  std::cout << "strategy " << rep["strategy"].get<std::string>() << " ("
            << rep["family"].get<std::string>() << "), "
            << rep["runs"].get<int>() << " runs\n";
  std::cout << "  WA " << rep["wa_mean"].get<double>() << " +/- "
            << rep["wa_std"].get<double>() << "\n";
  std::cout << "  UA " << rep["ua_mean"].get<double>() << " +/- "
            << rep["ua_std"].get<double>() << "\n";
  std::cout << "  params " << rep["params"].get<double>() << "\n";
  for (const auto& e : rep["per_fold"]) {
    std::cout << "  fold " << e["fold"].get<int>() << " seed "
              << e["seed"].get<uint64_t>() << ": WA "
              << e["metrics"]["wa"].get<double>() << " UA "
              << e["metrics"]["ua"].get<double>() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentiable architecture search for speech emotion recognition"};
  app.require_subcommand(1);

  GlobalOpts g;
  std::string arch_path;

  auto* synth = app.add_subcommand("synth-data", "generate the synthetic corpus");
  add_common(synth, g);
  auto* baseline = app.add_subcommand("baseline", "train the fixed architecture");
  add_common(baseline, g);
  auto* search_cmd =
      app.add_subcommand("search", "architecture search (joint/sampling/dropout)");
  add_common(search_cmd, g);
  auto* random_cmd = app.add_subcommand("random-search", "random-search baseline");
  add_common(random_cmd, g);
  auto* retrain = app.add_subcommand("retrain", "retrain an architecture document");
  add_common(retrain, g);
  retrain->add_option("--arch", arch_path, "architecture document")->required();
  auto* report = app.add_subcommand("report", "summarize a finished run directory");
  add_common(report, g, /*need_config=*/false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return do_synth_data(g);
    if (baseline->parsed()) return run_strategy(g, {"none"});
    if (search_cmd->parsed())
      return run_strategy(g, {"joint", "sampling", "dropout"});
    if (random_cmd->parsed()) return run_strategy(g, {"random"});
    if (retrain->parsed()) return do_retrain(g, arch_path);
    if (report->parsed()) return do_report(g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
