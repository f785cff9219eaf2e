#include "sernas/harness/folds.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace sernas::harness {

std::vector<FoldPlan> make_fold_plans(const std::vector<audio::Utterance>& utts) {
  std::map<int, std::set<int>> session_speakers;
  for (const auto& u : utts) session_speakers[u.session].insert(u.speaker);
  if (session_speakers.size() < 5)
    throw std::invalid_argument("fold construction needs at least 5 sessions, got " +
                                std::to_string(session_speakers.size()));
  for (const auto& [sess, spk] : session_speakers)
    if (spk.size() != 2)
      throw std::invalid_argument("session " + std::to_string(sess) +
                                  " must have exactly 2 speakers, got " +
                                  std::to_string(spk.size()));

  std::vector<FoldPlan> plans;
  int fold = 0;
  for (const auto& [held_out, spk] : session_speakers) {
    FoldPlan p;
    p.fold = fold++;
    auto it = spk.begin();
    p.val_speaker = *it++;
    p.test_speaker = *it;
    for (const auto& [sess, others] : session_speakers) {
      if (sess == held_out) continue;
      for (int s : others) p.train_speakers.push_back(s);
    }
    std::sort(p.train_speakers.begin(), p.train_speakers.end());
    plans.push_back(std::move(p));
  }
  return plans;
}

}  // namespace sernas::harness
