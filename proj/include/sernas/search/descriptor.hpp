#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sernas::search {

enum class OpKind { conv, attention, dense_stack };

// One candidate operation in a mixed layer: a conv kernel geometry, an
// attention channel count, or a dense bottleneck width.
struct CandidateDesc {
  OpKind kind = OpKind::conv;
  int kh = 0, kw = 0;  // conv kernel (time x frequency)
  int width = 0;       // attention channels / dense width

  bool operator==(const CandidateDesc&) const = default;

  std::string str() const {
    switch (kind) {
      case OpKind::conv:
        return "conv" + std::to_string(kh) + "x" + std::to_string(kw);
      case OpKind::attention:
        return "att" + std::to_string(width);
      case OpKind::dense_stack:
        return "dense" + std::to_string(width);
    }
    return "?";
  }

  static CandidateDesc conv(int kh, int kw) { return {OpKind::conv, kh, kw, 0}; }
  static CandidateDesc attention(int ch) { return {OpKind::attention, 0, 0, ch}; }
  static CandidateDesc dense(int d) { return {OpKind::dense_stack, 0, 0, d}; }
};

struct CandidateSet {
  std::string layer_id;
  std::vector<CandidateDesc> ops;

  void validate() const {
    if (ops.empty())
      throw std::invalid_argument("candidate set for layer " + layer_id +
                                  " is empty");
    for (size_t i = 0; i < ops.size(); ++i)
      for (size_t j = i + 1; j < ops.size(); ++j)
        if (ops[i] == ops[j])
          throw std::invalid_argument("duplicate candidate " + ops[i].str() +
                                      " in layer " + layer_id);
  }
};

using KernelList = std::vector<std::pair<int, int>>;

// Candidate operation sets of the two CNN families. The first pair of
// parallel conv layers draws from one shared kernel set, with the second
// branch transposed (time/frequency swapped). The deeper conv layers share a
// separate set with independent weights.
inline KernelList default_pair_kernels() {
  return {{2, 8}, {2, 7}, {2, 6}, {1, 9}, {1, 10}, {3, 5}};
}

inline KernelList default_deep_kernels() {
  return {{5, 5}, {5, 4}, {4, 5}, {4, 4}, {4, 6}, {6, 4}};
}

inline std::vector<int> default_head_widths() { return {32, 48, 64, 80}; }

// Baseline (fixed) configurations: single-candidate sets.
inline KernelList baseline_pair_kernels() { return {{2, 8}}; }
inline KernelList baseline_deep_kernels() { return {{5, 5}}; }
inline std::vector<int> baseline_head_widths() { return {64}; }

}  // namespace sernas::search
