#pragma once

#include <stdexcept>
#include <vector>

#include "sernas/ad/tensor.hpp"
#include "sernas/audio/types.hpp"

namespace sernas::train {

// One side of a fold: fixed-length segments for batched training and whole
// spectrograms for evaluation.
struct DataSplit {
  std::vector<audio::Spectrogram> segments;
  std::vector<int> seg_labels;
  std::vector<audio::Spectrogram> utterances;
  std::vector<int> utt_labels;
};

// [B,1,T,F] batch from the indexed segments; all segments share T and F.
template <typename T>
std::pair<ad::TensorPtr<T>, std::vector<int>> make_batch(
    const DataSplit& d, const std::vector<int>& order, size_t from, size_t count) {
  if (d.segments.empty()) throw std::invalid_argument("make_batch: no segments");
  const int frames = d.segments[0].frames, bins = d.segments[0].bins;
  const int B = static_cast<int>(count);
  auto x = ad::Tensor<T>::zeros({B, 1, frames, bins});
  std::vector<int> y(count);
  for (size_t i = 0; i < count; ++i) {
    const auto& s = d.segments[order[from + i]];
    if (s.frames != frames || s.bins != bins)
      throw std::invalid_argument("make_batch: inconsistent segment shapes");
    for (size_t j = 0; j < s.mag.size(); ++j)
      x->value[i * s.mag.size() + j] = static_cast<T>(s.mag[j]);
    y[i] = d.seg_labels[order[from + i]];
  }
  return {x, y};
}

// Single whole-utterance batch.
template <typename T>
ad::TensorPtr<T> make_utterance_input(const audio::Spectrogram& s) {
  auto x = ad::Tensor<T>::zeros({1, 1, s.frames, s.bins});
  for (size_t j = 0; j < s.mag.size(); ++j)
    x->value[j] = static_cast<T>(s.mag[j]);
  return x;
}

}  // namespace sernas::train
