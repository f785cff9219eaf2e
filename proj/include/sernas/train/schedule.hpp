#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace sernas::train {

// Staged learning-rate schedule. The rate stays at rates[0] for the warm
// epochs; afterwards, at each epoch boundary, the stage advances by one when
// the epoch's mean training loss has fallen to initial/10^(stage+1), where
// "initial" is the first epoch's mean loss. Stages never retreat and never
// skip.
class LRSchedule {
 public:
  LRSchedule(std::vector<double> rates, int warm_epochs)
      : rates_(std::move(rates)), warm_(warm_epochs) {
    if (rates_.empty()) throw std::invalid_argument("schedule: no rates");
    for (size_t i = 1; i < rates_.size(); ++i)
      if (rates_[i] >= rates_[i - 1])
        throw std::invalid_argument("schedule: rates must be strictly decreasing");
  }

  double rate() const { return rates_[stage_]; }
  int stage() const { return stage_; }

  void observe_epoch(double mean_loss) {
    ++epochs_seen_;
    if (epochs_seen_ == 1) initial_loss_ = mean_loss;
    if (epochs_seen_ <= warm_) return;
    if (stage_ + 1 < static_cast<int>(rates_.size()) &&
        mean_loss <= initial_loss_ / std::pow(10.0, stage_ + 1))
      ++stage_;
  }

 private:
  std::vector<double> rates_;
  int warm_;
  int stage_ = 0;
  int epochs_seen_ = 0;
  double initial_loss_ = 0.0;
};

}  // namespace sernas::train
