#include "sernas/harness/metrics.hpp"

#include <stdexcept>

namespace sernas::harness {

MetricsEntry compute_metrics(const std::vector<int>& predictions,
                             const std::vector<int>& labels, int num_classes) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("compute_metrics: " +
                                std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(labels.size()) +
                                " labels");
  MetricsEntry m;
  m.total = static_cast<int>(labels.size());
  m.confusion.assign(num_classes, std::vector<int>(num_classes, 0));
  for (size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = predictions[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw std::invalid_argument("compute_metrics: class index out of range");
    m.confusion[t][p] += 1;
  }
  int correct = 0;
  m.per_class.assign(num_classes, -1.0);
  double recall_sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    int support = 0;
    for (int p = 0; p < num_classes; ++p) support += m.confusion[c][p];
    correct += m.confusion[c][c];
    if (support > 0) {
      m.per_class[c] = static_cast<double>(m.confusion[c][c]) / support;
      recall_sum += m.per_class[c];
      present += 1;
    }
  }
  m.wa = m.total > 0 ? static_cast<double>(correct) / m.total : 0.0;
  m.ua = present > 0 ? recall_sum / present : 0.0;
  return m;
}

}  // namespace sernas::harness
