#pragma once

// Path masks: the carrier of sampling/dropout decisions. sample mode keeps
// exactly one candidate per mixed layer; dropout mode drops exactly k per
// layer and rescales the layer output by N/(N-k). Every draw is validated
// against its mode's cardinality invariant.

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sernas/ad/rng.hpp"

namespace sernas::search {

struct PathMask {
  enum class Mode { full, sample, dropout };
  Mode mode = Mode::full;
  std::vector<std::vector<uint8_t>> keep;  // per mixed layer
  std::vector<double> layer_scale;         // 1, or N/(N-k) in dropout mode
  int k = 0;

  int kept_count(size_t layer) const {
    int n = 0;
    for (uint8_t b : keep[layer]) n += b != 0;
    return n;
  }

  int chosen(size_t layer) const {
    for (size_t i = 0; i < keep[layer].size(); ++i)
      if (keep[layer][i]) return static_cast<int>(i);
    throw std::logic_error("mask keeps nothing in layer " + std::to_string(layer));
  }

  void validate(const std::vector<int>& layer_sizes) const {
    if (keep.size() != layer_sizes.size() || layer_scale.size() != layer_sizes.size())
      throw std::invalid_argument("path mask layer count mismatch");
    for (size_t l = 0; l < keep.size(); ++l) {
      if (static_cast<int>(keep[l].size()) != layer_sizes[l])
        throw std::invalid_argument("path mask size mismatch in layer " +
                                    std::to_string(l));
      const int kept = kept_count(l);
      const int n = layer_sizes[l];
      switch (mode) {
        case Mode::full:
          if (kept != n || layer_scale[l] != 1.0)
            throw std::invalid_argument("full mask must keep all with scale 1");
          break;
        case Mode::sample:
          if (kept != 1 || layer_scale[l] != 1.0)
            throw std::invalid_argument("sample mask must keep exactly 1 with scale 1");
          break;
        case Mode::dropout:
          if (kept != n - k || kept < 1)
            throw std::invalid_argument("dropout mask must keep N-k >= 1 candidates");
          if (layer_scale[l] != static_cast<double>(n) / kept)
            throw std::invalid_argument("dropout mask scale must be N/(N-k)");
          break;
      }
    }
  }
};

inline PathMask full_mask(const std::vector<int>& layer_sizes) {
  PathMask m;
  m.mode = PathMask::Mode::full;
  for (int n : layer_sizes) {
    m.keep.emplace_back(n, uint8_t{1});
    m.layer_scale.push_back(1.0);
  }
  return m;
}

// Uniformly selects exactly one candidate per mixed layer, independently
// across layers.
inline PathMask sample_path_mask(const std::vector<int>& layer_sizes,
                                 RngStream& rng) {
  if (layer_sizes.empty())
    throw std::invalid_argument("sample_path: no mixed layers");
  PathMask m;
  m.mode = PathMask::Mode::sample;
  for (int n : layer_sizes) {
    std::vector<uint8_t> keep(n, 0);
    keep[rng.uniform_int(n)] = 1;
    m.keep.push_back(std::move(keep));
    m.layer_scale.push_back(1.0);
  }
  m.validate(layer_sizes);
  return m;
}

// Uniformly drops exactly k candidates per mixed layer; never drops all.
inline PathMask dropout_path_mask(const std::vector<int>& layer_sizes, int k,
                                  RngStream& rng) {
  if (layer_sizes.empty())
    throw std::invalid_argument("dropout_mask: no mixed layers");
  if (k < 1) throw std::invalid_argument("dropout_mask: k must be >= 1");
  for (int n : layer_sizes)
    if (k >= n)
      throw std::invalid_argument(
          "dropout_mask: k=" + std::to_string(k) +
          " would drop every candidate in a layer of size " + std::to_string(n));
  PathMask m;
  m.mode = PathMask::Mode::dropout;
  m.k = k;
  for (int n : layer_sizes) {
    // partial Fisher-Yates: the first k entries are the dropped subset
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
      const int j = i + rng.uniform_int(n - i);
      std::swap(idx[i], idx[j]);
    }
    std::vector<uint8_t> keep(n, 1);
    for (int i = 0; i < k; ++i) keep[idx[i]] = 0;
    m.keep.push_back(std::move(keep));
    m.layer_scale.push_back(static_cast<double>(n) / (n - k));
  }
  m.validate(layer_sizes);
  return m;
}

}  // namespace sernas::search
