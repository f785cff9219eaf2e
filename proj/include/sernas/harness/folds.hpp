#pragma once

#include <vector>

#include "sernas/audio/types.hpp"

namespace sernas::harness {

// Speaker-disjoint cross-validation: each fold holds out one session; its
// first speaker becomes validation, its second test, and all speakers from
// the remaining sessions train.
struct FoldPlan {
  int fold = 0;
  std::vector<int> train_speakers;
  int val_speaker = -1;
  int test_speaker = -1;
};

std::vector<FoldPlan> make_fold_plans(const std::vector<audio::Utterance>& utts);

}  // namespace sernas::harness
