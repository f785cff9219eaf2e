#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sernas/audio/stft.hpp"
#include "sernas/audio/synth.hpp"
#include "sernas/search/supernet.hpp"

namespace sernas::harness {

struct ScheduleConfig {
  std::vector<double> rates{1e-3, 5e-4, 2e-4, 1e-4};
  int warm_epochs = 3;
};

struct DatasetConfig {
  std::string source = "synthetic";  // synthetic | manifest
  int n_utterances = 600;
  uint64_t seed = 7;
  std::string manifest;
  double noise_level = 0.35;
};

// Declarative experiment description. Parsing is strict: unknown fields are
// rejected with their path. Candidate sets left out of the file resolve to
// family defaults (full search sets, or the fixed baseline ops when the
// strategy is "none").
struct ExperimentConfig {
  std::string strategy = "none";  // none | random | joint | sampling | dropout
  int k = 1;
  int epochs_search = 60;
  int epochs_retrain = 20;
  int batch_size = 16;
  std::vector<uint64_t> seeds{1};
  int precision = 32;  // 32 | 64
  double arch_lr = 1e-3;
  int arch_warmup_epochs = 0;
  int probe_interval = 20;
  int probe_batch = 16;
  uint64_t probe_seed = 1234;
  int random_candidates = 5;
  int workers = 1;
  std::string cache_dir;

  ScheduleConfig schedule;
  DatasetConfig dataset;
  audio::StftConfig frontend;
  double segment_seconds = 2.0;
  search::SearchSpaceSpec space;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& json_text);
std::string emit_config(const ExperimentConfig& cfg);  // canonical JSON

bool config_equal(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace sernas::harness
