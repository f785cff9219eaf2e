#pragma once

#include <array>
#include <vector>

#include "sernas/ad/rng.hpp"
#include "sernas/audio/types.hpp"

namespace sernas::audio {

// Synthetic 4-class corpus standing in for licensed speech data. Every class
// is a distinct spectro-temporal signature: band-limited noise in a
// class-specific frequency band, amplitude-modulated at a class-specific
// rate, over 2-6 s at 16 kHz, plus broadband background noise. Speaker and
// session ids are assigned round-robin over 10 speakers in 5 sessions (two
// speakers per session) to support the fold protocol.
struct SynthConfig {
  int n_utterances = 600;
  int classes = 4;
  int sample_rate = 16000;
  double min_seconds = 2.0, max_seconds = 6.0;
  int speakers = 10;
  int sessions = 5;
  // within-pair bands overlap by half, so the modulation rate carries part of
  // the class identity; whole-utterance band energy still separates all four
  std::array<std::pair<double, double>, 4> bands = {
      std::pair<double, double>{600, 1400},
      {1000, 1800},
      {3000, 3800},
      {3400, 4200}};
  std::array<double, 4> am_rates = {2.0, 8.0, 2.5, 9.0};
  double am_depth = 0.9;
  double noise_level = 0.35;  // broadband noise amplitude relative to signal RMS
  double speaker_band_spread = 0.02;  // per-speaker band shift, fraction
};

std::vector<Utterance> synth_dataset(const SynthConfig& cfg, RngStream rng);

}  // namespace sernas::audio
