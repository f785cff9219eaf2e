#pragma once

// Experiment orchestration: fold preparation, per-(fold, seed) strategy runs
// on a bounded worker pool, per-run artifacts (curves, architecture document,
// run summary), and the aggregate report. Everything that lands in the
// aggregate JSON is a pure function of the configuration, so two runs with
// the same config are byte-identical.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sernas/harness/config.hpp"
#include "sernas/harness/data.hpp"
#include "sernas/harness/metrics.hpp"
#include "sernas/train/strategies.hpp"

namespace sernas::harness {

using nlohmann::json;

struct RunOutput {
  int fold = 0;
  uint64_t seed = 0;
  MetricsEntry test;
  search::DiscreteArch arch;
  double best_val_wa = 0.0;
  int64_t params = 0;
};

namespace detail {

inline json metrics_json(const MetricsEntry& m) {
  json j;
  j["wa"] = m.wa;
  j["ua"] = m.ua;
  j["per_class"] = m.per_class;
  j["confusion"] = m.confusion;
  j["total"] = m.total;
  return j;
}

template <typename T>
search::PathMask make_probe_mask(search::Supernet<T>& net, uint64_t probe_seed) {
  auto rng = RngStream(probe_seed, "probe_arch");
  return search::sample_path_mask(net.mixed_sizes(), rng);
}

template <typename T>
train::TrainOptions search_options(const ExperimentConfig& cfg,
                                   const search::PathMask* probe) {
  train::TrainOptions opt;
  opt.epochs = cfg.epochs_search;
  opt.batch_size = cfg.batch_size;
  opt.lr_stages = cfg.schedule.rates;
  opt.warm_epochs = cfg.schedule.warm_epochs;
  opt.arch_lr = cfg.arch_lr;
  opt.arch_warmup_epochs = cfg.arch_warmup_epochs;
  opt.k = cfg.k;
  opt.probe_interval = cfg.probe_interval;
  opt.probe_batch = cfg.probe_batch;
  opt.probe_mask = probe;
  return opt;
}

inline train::TrainOptions retrain_options(const ExperimentConfig& cfg) {
  train::TrainOptions opt;
  opt.epochs = cfg.epochs_retrain;
  opt.batch_size = cfg.batch_size;
  opt.lr_stages = cfg.schedule.rates;
  opt.warm_epochs = cfg.schedule.warm_epochs;
  return opt;
}

}  // namespace detail

// One strategy run on one fold with one seed. Writes curves and the
// architecture document into run_dir when it is non-empty.
template <typename T>
RunOutput run_single(const ExperimentConfig& cfg, const PreparedFold& fold,
                     uint64_t seed, const std::string& run_dir) {
  namespace fs = std::filesystem;
  if (!run_dir.empty()) fs::create_directories(run_dir);

  RunOutput out;
  out.fold = fold.plan.fold;
  out.seed = seed;
  RngStream root(seed, "run/fold" + std::to_string(fold.plan.fold));

  auto write_curves = [&](const train::TrainLog& log, const std::string& stem) {
    if (run_dir.empty() || log.rows.empty()) return;
    train::emit_curves(log, run_dir + "/" + stem + "_train.csv",
                       run_dir + "/" + stem + "_probe.csv");
  };

  const std::string strat = cfg.strategy;
  if (strat == "none" || strat == "random") {
    train::RetrainResult<T> trained;
    if (strat == "none") {
      auto net = search::build_supernet<T>(cfg.space, fold.freq_bins,
                                           root.split("build"));
      out.arch = search::derive_architecture(*net);
      auto collapsed = search::collapse_spec(*net, out.arch);
      trained = train::retrain_selected<T>(collapsed, fold.freq_bins, fold.train,
                                           fold.val, detail::retrain_options(cfg),
                                           root.split("retrain"));
    } else {
      auto rs = train::random_search<T>(cfg.space, fold.freq_bins, fold.train,
                                        fold.val, cfg.random_candidates,
                                        detail::retrain_options(cfg),
                                        root.split("random_search"));
      out.arch = rs.arch;
      trained = std::move(rs.trained);
    }
    out.best_val_wa = trained.best_val_wa;
    out.params = out.arch.param_count;
    search::ForwardSpec<T> eval_spec;
    out.test = train::evaluate(*trained.model, fold.test, eval_spec);
    write_curves(trained.log, "retrain");
    if (!run_dir.empty()) search::write_arch(out.arch, run_dir + "/arch.txt");
    return out;
  }

  // differentiable search: search -> derive -> retrain
  auto net = search::build_supernet<T>(cfg.space, fold.freq_bins,
                                       root.split("build"));
  auto probe = detail::make_probe_mask(*net, cfg.probe_seed);
  auto opt = detail::search_options<T>(cfg, &probe);

  train::TrainResult<T> searched;
  if (strat == "joint") {
    searched = train::train_joint(*net, fold.train, opt, root.split("search"));
  } else if (strat == "sampling") {
    searched = train::train_bilevel(*net, fold.train, fold.val,
                                    search::PathMask::Mode::sample, opt,
                                    root.split("search"));
  } else if (strat == "dropout") {
    searched = train::train_bilevel(*net, fold.train, fold.val,
                                    search::PathMask::Mode::dropout, opt,
                                    root.split("search"));
  } else {
    throw std::invalid_argument("unknown strategy " + strat);
  }
  write_curves(searched.log, "curves");

  out.arch = search::derive_architecture(*net);
  out.params = out.arch.param_count;
  if (!run_dir.empty()) search::write_arch(out.arch, run_dir + "/arch.txt");

  auto collapsed = search::collapse_spec(*net, out.arch);
  auto trained = train::retrain_selected<T>(collapsed, fold.freq_bins, fold.train,
                                            fold.val, detail::retrain_options(cfg),
                                            root.split("retrain"));
  out.best_val_wa = trained.best_val_wa;
  write_curves(trained.log, "retrain");
  search::ForwardSpec<T> eval_spec;
  out.test = train::evaluate(*trained.model, fold.test, eval_spec);
  return out;
}

inline json aggregate_report(const ExperimentConfig& cfg,
                             const std::vector<RunOutput>& runs) {
  json rep;
  double wa_sum = 0, ua_sum = 0, params_sum = 0;
  for (const auto& r : runs) {
    wa_sum += r.test.wa;
    ua_sum += r.test.ua;
    params_sum += static_cast<double>(r.params);
  }
  const double n = static_cast<double>(runs.size());
  const double wa_mean = wa_sum / n, ua_mean = ua_sum / n;
  double wa_var = 0, ua_var = 0;
  for (const auto& r : runs) {
    wa_var += (r.test.wa - wa_mean) * (r.test.wa - wa_mean);
    ua_var += (r.test.ua - ua_mean) * (r.test.ua - ua_mean);
  }
  rep["strategy"] = cfg.strategy;
  rep["family"] = search::family_str(cfg.space.family);
  rep["runs"] = runs.size();
  rep["wa_mean"] = wa_mean;
  rep["wa_std"] = std::sqrt(wa_var / n);
  rep["ua_mean"] = ua_mean;
  rep["ua_std"] = std::sqrt(ua_var / n);
  rep["params"] = params_sum / n;
  json per_fold = json::array();
  for (const auto& r : runs) {
    json e;
    e["fold"] = r.fold;
    e["seed"] = r.seed;
    e["metrics"] = detail::metrics_json(r.test);
    e["best_val_wa"] = r.best_val_wa;
    e["params"] = r.params;
    e["arch"] = r.arch.op_names;
    per_fold.push_back(std::move(e));
  }
  rep["per_fold"] = std::move(per_fold);
  return rep;
}

// Full protocol: every fold (or one chosen fold) x every seed, dispatched to
// a bounded worker pool. Feature extraction happens up front, single
// threaded; workers share the prepared folds read-only.
inline json run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                           int only_fold = -1) {
  namespace fs = std::filesystem;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream echo(out_dir + "/config_resolved.json");
    echo << emit_config(cfg);
  }
  if (!cfg.cache_dir.empty()) fs::create_directories(cfg.cache_dir);

  auto utts = load_dataset(cfg);
  auto plans = make_fold_plans(utts);
  std::vector<PreparedFold> folds;
  for (const auto& p : plans) {
    if (only_fold >= 0 && p.fold != only_fold) continue;
    folds.push_back(prepare_fold(utts, p, cfg));
  }
  if (folds.empty()) throw std::invalid_argument("no folds selected");

  struct Job {
    const PreparedFold* fold;
    uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& f : folds)
    for (uint64_t s : cfg.seeds) jobs.push_back({&f, s});

  std::vector<RunOutput> results(jobs.size());
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const auto& job = jobs[i];
        const std::string run_dir =
            out_dir.empty() ? ""
                            : out_dir + "/fold" + std::to_string(job.fold->plan.fold) +
                                  "/seed" + std::to_string(job.seed);
        auto run = [&](auto tag) {
          using T = decltype(tag);
          return run_single<T>(cfg, *job.fold, job.seed, run_dir);
        };
        results[i] = cfg.precision == 64 ? run(double{}) : run(float{});
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int n_workers = std::max(
      1, std::min<int>(cfg.workers, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  auto rep = aggregate_report(cfg, results);
  if (!out_dir.empty()) {
    std::ofstream f(out_dir + "/report.json");
    f << rep.dump(2) << "\n";
  }
  return rep;
}

}  // namespace sernas::harness
