#pragma once

#include <string>
#include <vector>

#include "sernas/audio/stft.hpp"
#include "sernas/audio/synth.hpp"
#include "sernas/audio/wav.hpp"
#include "sernas/harness/config.hpp"
#include "sernas/harness/folds.hpp"
#include "sernas/train/data.hpp"

namespace sernas::harness {

struct PreparedFold {
  FoldPlan plan;
  train::DataSplit train, val, test;
  int freq_bins = 0;
  uint64_t stats_fingerprint = 0;
};

inline std::vector<audio::Utterance> load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.source == "manifest")
    return audio::load_manifest(cfg.dataset.manifest);
  audio::SynthConfig sc;
  sc.n_utterances = cfg.dataset.n_utterances;
  sc.noise_level = cfg.dataset.noise_level;
  return audio::synth_dataset(sc, RngStream(cfg.dataset.seed, "dataset"));
}

// Spectrogram extraction with optional write-through caching, per-fold
// normalization from training speakers only, 2-second training/validation
// segments, and whole spectrograms for evaluation.
inline PreparedFold prepare_fold(const std::vector<audio::Utterance>& utts,
                                 const FoldPlan& plan,
                                 const ExperimentConfig& cfg) {
  PreparedFold out;
  out.plan = plan;

  std::vector<audio::Spectrogram> specs(utts.size());
  for (size_t i = 0; i < utts.size(); ++i) {
    if (!cfg.cache_dir.empty()) {
      const auto path = cfg.cache_dir + "/" + utts[i].id + "_" +
                        std::to_string(cfg.frontend.dft_len) + "_" +
                        std::to_string(static_cast<int>(cfg.frontend.window_ms)) +
                        "_" +
                        std::to_string(static_cast<int>(cfg.frontend.shift_ms)) +
                        ".spec";
      std::ifstream probe(path);
      if (probe.good()) {
        specs[i] = audio::load_spectrogram(path);
        continue;
      }
      specs[i] = audio::stft_spectrogram(utts[i], cfg.frontend);
      audio::save_spectrogram(specs[i], path);
    } else {
      specs[i] = audio::stft_spectrogram(utts[i], cfg.frontend);
    }
  }
  out.freq_bins = specs.empty() ? 0 : specs[0].bins;

  std::vector<const audio::Spectrogram*> train_specs;
  auto in_train = [&](int speaker) {
    for (int s : plan.train_speakers)
      if (s == speaker) return true;
    return false;
  };
  for (size_t i = 0; i < utts.size(); ++i)
    if (in_train(utts[i].speaker)) train_specs.push_back(&specs[i]);
  auto stats = audio::compute_norm_stats(train_specs);
  out.stats_fingerprint = audio::stats_fingerprint(stats);

  for (size_t i = 0; i < utts.size(); ++i) {
    audio::normalize(specs[i], stats);
    const int label = utts[i].label;
    train::DataSplit* split = nullptr;
    if (in_train(utts[i].speaker))
      split = &out.train;
    else if (utts[i].speaker == plan.val_speaker)
      split = &out.val;
    else if (utts[i].speaker == plan.test_speaker)
      split = &out.test;
    else
      continue;
    if (split != &out.test) {
      for (auto& seg : audio::segment(specs[i], cfg.segment_seconds)) {
        split->segments.push_back(std::move(seg));
        split->seg_labels.push_back(label);
      }
    }
    // the whole original spectrogram is used for evaluation
    split->utterances.push_back(std::move(specs[i]));
    split->utt_labels.push_back(label);
  }
  return out;
}

}  // namespace sernas::harness
