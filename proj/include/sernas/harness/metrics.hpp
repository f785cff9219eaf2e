#pragma once

#include <string>
#include <vector>

namespace sernas::harness {

// WA is overall sample accuracy; UA is the unweighted mean of per-class
// recalls over classes present in the labels.
struct MetricsEntry {
  double wa = 0.0;
  double ua = 0.0;
  std::vector<double> per_class;        // recall per class; -1 if absent
  std::vector<std::vector<int>> confusion;  // [true][pred]
  int total = 0;
};

MetricsEntry compute_metrics(const std::vector<int>& predictions,
                             const std::vector<int>& labels, int num_classes);

}  // namespace sernas::harness
