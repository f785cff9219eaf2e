#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sernas::audio {

inline const std::vector<std::string>& emotion_names() {
  static const std::vector<std::string> names = {"Neutral", "Angry", "Happy",
                                                 "Sad"};
  return names;
}

inline int emotion_index(const std::string& name) {
  const auto& n = emotion_names();
  for (size_t i = 0; i < n.size(); ++i)
    if (n[i] == name) return static_cast<int>(i);
  throw std::invalid_argument("unknown emotion label: " + name);
}

struct Utterance {
  std::vector<float> samples;  // mono, [-1, 1]
  int sample_rate = 0;
  int label = -1;    // index into emotion_names()
  int speaker = -1;
  int session = -1;
  std::string id;

  void validate() const {
    if (sample_rate <= 0)
      throw std::invalid_argument("utterance " + id + ": bad sample rate");
    if (samples.empty())
      throw std::invalid_argument("utterance " + id + ": empty waveform");
  }
};

// Magnitude spectrogram, row-major [frames][bins], float32 payload to match
// the on-disk cache format.
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<float> mag;
  double frame_shift_s = 0.0;
  bool normalized = false;

  float& at(int t, int f) { return mag[static_cast<size_t>(t) * bins + f]; }
  float at(int t, int f) const { return mag[static_cast<size_t>(t) * bins + f]; }
};

// Per-bin standardization statistics, computed from training folds only.
struct NormStats {
  std::vector<double> mean, stdev;
};

}  // namespace sernas::audio
