#include "sernas/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sernas::harness {

using nlohmann::json;
using search::Family;
using search::KernelList;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw std::invalid_argument("config: " + path + ": " + msg);
}

void check_fields(const json& j, const std::string& path,
                  const std::set<std::string>& known) {
  if (!j.is_object()) fail(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      fail(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
}

KernelList parse_kernels(const json& j, const std::string& path) {
  KernelList ks;
  if (!j.is_array()) fail(path, "expected an array of [kh,kw] pairs");
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) fail(path, "kernel must be [kh,kw]");
    ks.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  return ks;
}

json kernels_json(const KernelList& ks) {
  json a = json::array();
  for (auto [kh, kw] : ks) a.push_back({kh, kw});
  return a;
}

Family parse_family(const std::string& s) {
  if (s == "cnn_rnn_att") return Family::cnn_rnn_att;
  if (s == "cnn_seqcap") return Family::cnn_seqcap;
  if (s == "custom") return Family::custom;
  throw std::invalid_argument("config: family: unknown value '" + s + "'");
}

void validate(const ExperimentConfig& c) {
  const std::set<std::string> strategies = {"none", "random", "joint",
                                            "sampling", "dropout"};
  if (!strategies.count(c.strategy))
    fail("strategy", "unknown value '" + c.strategy + "'");
  if (c.seeds.empty()) fail("seeds", "must be non-empty");
  if (c.precision != 32 && c.precision != 64) fail("precision", "must be 32 or 64");
  if (c.batch_size < 1) fail("batch_size", "must be >= 1");
  if (c.epochs_search < 1) fail("epochs_search", "must be >= 1");
  if (c.epochs_retrain < 1) fail("epochs_retrain", "must be >= 1");
  if (c.random_candidates < 1) fail("random_candidates", "must be >= 1");
  if (c.workers < 1) fail("workers", "must be >= 1");
  if (c.schedule.warm_epochs < 0) fail("schedule.warm_epochs", "must be >= 0");
  if (c.schedule.rates.empty()) fail("schedule.rates", "must be non-empty");
  for (size_t i = 1; i < c.schedule.rates.size(); ++i)
    if (c.schedule.rates[i] >= c.schedule.rates[i - 1])
      fail("schedule.rates", "must be strictly decreasing");
  if (c.dataset.source != "synthetic" && c.dataset.source != "manifest")
    fail("dataset.source", "must be synthetic or manifest");
  if (c.dataset.source == "manifest" && c.dataset.manifest.empty())
    fail("dataset.manifest", "required for manifest datasets");

  if (c.space.family == Family::custom && c.space.custom_stages.empty())
    fail("search_space.custom_stages", "required for the custom family");

  if (c.strategy == "dropout") {
    int min_n = 1 << 30;
    if (c.space.family == Family::custom) {
      for (const auto& s : c.space.custom_stages)
        if (!s.is_pool) min_n = std::min(min_n, static_cast<int>(s.kernels.size()));
    } else {
      min_n = std::min({static_cast<int>(c.space.pair_kernels.size()),
                        static_cast<int>(c.space.conv3_kernels.size()),
                        static_cast<int>(c.space.conv4_kernels.size()),
                        static_cast<int>(c.space.head_widths.size())});
    }
    if (c.k < 1 || c.k >= min_n)
      fail("k", "k=" + std::to_string(c.k) +
                    " must satisfy 1 <= k < smallest candidate count (" +
                    std::to_string(min_n) + ")");
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
  }
  check_fields(j, "",
               {"family", "strategy", "k", "epochs_search", "epochs_retrain",
                "batch_size", "seeds", "precision", "arch_lr",
                "arch_warmup_epochs", "probe_interval", "probe_batch",
                "probe_seed", "random_candidates", "workers", "cache_dir",
                "schedule", "dataset", "frontend", "segment_seconds",
                "search_space"});

  ExperimentConfig c;
  if (!j.contains("family")) fail("family", "required");
  c.space.family = parse_family(j.at("family").get<std::string>());
  if (j.contains("strategy")) c.strategy = j.at("strategy").get<std::string>();

  // candidate-set defaults depend on the strategy: searches get the full
  // sets, the baseline gets the fixed ops
  if (c.strategy == "none") {
    c.space.pair_kernels = search::baseline_pair_kernels();
    c.space.conv3_kernels = search::baseline_deep_kernels();
    c.space.conv4_kernels = search::baseline_deep_kernels();
    c.space.head_widths = search::baseline_head_widths();
  }

  auto get_int = [&](const json& o, const char* k, int& dst) {
    if (o.contains(k)) dst = o.at(k).get<int>();
  };
  get_int(j, "k", c.k);
  get_int(j, "epochs_search", c.epochs_search);
  get_int(j, "epochs_retrain", c.epochs_retrain);
  get_int(j, "batch_size", c.batch_size);
  get_int(j, "precision", c.precision);
  get_int(j, "arch_warmup_epochs", c.arch_warmup_epochs);
  get_int(j, "probe_interval", c.probe_interval);
  get_int(j, "probe_batch", c.probe_batch);
  get_int(j, "random_candidates", c.random_candidates);
  get_int(j, "workers", c.workers);
  if (j.contains("arch_lr")) c.arch_lr = j.at("arch_lr").get<double>();
  if (j.contains("probe_seed")) c.probe_seed = j.at("probe_seed").get<uint64_t>();
  if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
  if (j.contains("segment_seconds"))
    c.segment_seconds = j.at("segment_seconds").get<double>();
  if (j.contains("seeds")) {
    c.seeds.clear();
    for (const auto& s : j.at("seeds")) c.seeds.push_back(s.get<uint64_t>());
  }

  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    check_fields(s, "schedule", {"rates", "warm_epochs"});
    if (s.contains("rates")) {
      c.schedule.rates.clear();
      for (const auto& r : s.at("rates")) c.schedule.rates.push_back(r.get<double>());
    }
    if (s.contains("warm_epochs"))
      c.schedule.warm_epochs = s.at("warm_epochs").get<int>();
  }

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_fields(d, "dataset",
                 {"source", "n_utterances", "seed", "manifest", "noise_level"});
    if (d.contains("source")) c.dataset.source = d.at("source").get<std::string>();
    get_int(d, "n_utterances", c.dataset.n_utterances);
    if (d.contains("seed")) c.dataset.seed = d.at("seed").get<uint64_t>();
    if (d.contains("manifest")) c.dataset.manifest = d.at("manifest").get<std::string>();
    if (d.contains("noise_level"))
      c.dataset.noise_level = d.at("noise_level").get<double>();
  }

  if (j.contains("frontend")) {
    const auto& f = j.at("frontend");
    check_fields(f, "frontend", {"window_ms", "shift_ms", "dft_len"});
    if (f.contains("window_ms")) c.frontend.window_ms = f.at("window_ms").get<double>();
    if (f.contains("shift_ms")) c.frontend.shift_ms = f.at("shift_ms").get<double>();
    get_int(f, "dft_len", c.frontend.dft_len);
  }

  if (j.contains("search_space")) {
    const auto& s = j.at("search_space");
    check_fields(s, "search_space",
                 {"tied_conv_pair", "pair_kernels", "conv3_kernels",
                  "conv4_kernels", "head_widths", "custom_stages"});
    if (s.contains("tied_conv_pair"))
      c.space.tied_conv_pair = s.at("tied_conv_pair").get<bool>();
    if (s.contains("pair_kernels"))
      c.space.pair_kernels = parse_kernels(s.at("pair_kernels"),
                                           "search_space.pair_kernels");
    if (s.contains("conv3_kernels"))
      c.space.conv3_kernels = parse_kernels(s.at("conv3_kernels"),
                                            "search_space.conv3_kernels");
    if (s.contains("conv4_kernels"))
      c.space.conv4_kernels = parse_kernels(s.at("conv4_kernels"),
                                            "search_space.conv4_kernels");
    if (s.contains("head_widths")) {
      c.space.head_widths.clear();
      for (const auto& w : s.at("head_widths"))
        c.space.head_widths.push_back(w.get<int>());
    }
    if (s.contains("custom_stages")) {
      for (const auto& st : s.at("custom_stages")) {
        check_fields(st, "search_space.custom_stages",
                     {"type", "c_out", "kernels", "window"});
        search::SearchSpaceSpec::CustomStage cs;
        const std::string type = st.at("type").get<std::string>();
        if (type == "pool") {
          cs.is_pool = true;
          const auto& w = st.at("window");
          cs.ph = w.at(0).get<int>();
          cs.pw = w.at(1).get<int>();
        } else if (type == "conv") {
          cs.c_out = st.at("c_out").get<int>();
          cs.kernels = parse_kernels(st.at("kernels"),
                                     "search_space.custom_stages.kernels");
        } else {
          fail("search_space.custom_stages.type", "must be conv or pool");
        }
        c.space.custom_stages.push_back(std::move(cs));
      }
    }
  }

  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string emit_config(const ExperimentConfig& c) {
  json j;
  j["family"] = search::family_str(c.space.family);
  j["strategy"] = c.strategy;
  j["k"] = c.k;
  j["epochs_search"] = c.epochs_search;
  j["epochs_retrain"] = c.epochs_retrain;
  j["batch_size"] = c.batch_size;
  j["seeds"] = c.seeds;
  j["precision"] = c.precision;
  j["arch_lr"] = c.arch_lr;
  j["arch_warmup_epochs"] = c.arch_warmup_epochs;
  j["probe_interval"] = c.probe_interval;
  j["probe_batch"] = c.probe_batch;
  j["probe_seed"] = c.probe_seed;
  j["random_candidates"] = c.random_candidates;
  j["workers"] = c.workers;
  j["cache_dir"] = c.cache_dir;
  j["segment_seconds"] = c.segment_seconds;
  j["schedule"] = {{"rates", c.schedule.rates},
                   {"warm_epochs", c.schedule.warm_epochs}};
  j["dataset"] = {{"source", c.dataset.source},
                  {"n_utterances", c.dataset.n_utterances},
                  {"seed", c.dataset.seed},
                  {"manifest", c.dataset.manifest},
                  {"noise_level", c.dataset.noise_level}};
  j["frontend"] = {{"window_ms", c.frontend.window_ms},
                   {"shift_ms", c.frontend.shift_ms},
                   {"dft_len", c.frontend.dft_len}};
  json ss;
  ss["tied_conv_pair"] = c.space.tied_conv_pair;
  if (c.space.family != Family::custom) {
    ss["pair_kernels"] = kernels_json(c.space.pair_kernels);
    ss["conv3_kernels"] = kernels_json(c.space.conv3_kernels);
    ss["conv4_kernels"] = kernels_json(c.space.conv4_kernels);
    ss["head_widths"] = c.space.head_widths;
  } else {
    json stages = json::array();
    for (const auto& st : c.space.custom_stages) {
      if (st.is_pool)
        stages.push_back({{"type", "pool"}, {"window", {st.ph, st.pw}}});
      else
        stages.push_back({{"type", "conv"},
                          {"c_out", st.c_out},
                          {"kernels", kernels_json(st.kernels)}});
    }
    ss["custom_stages"] = stages;
  }
  j["search_space"] = ss;
  return j.dump(2) + "\n";
}

bool config_equal(const ExperimentConfig& a, const ExperimentConfig& b) {
  return emit_config(a) == emit_config(b);
}

}  // namespace sernas::harness
