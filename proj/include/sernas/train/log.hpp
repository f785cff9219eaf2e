#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sernas::train {

// Per-step training history: one "train" row per weight step, one "probe"
// row per probe of the fixed candidate architecture. wall_ms is elapsed
// wall clock and is excluded from any determinism-sensitive artifact.
struct TrainLogRow {
  int64_t step = 0;
  std::string phase;  // train | probe
  double loss = 0.0;
  double lr = 0.0;
  int64_t wall_ms = 0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void add(int64_t step, const std::string& phase, double loss, double lr) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    rows.push_back({step, phase, loss, lr, ms});
  }

  int64_t count(const std::string& phase) const {
    int64_t n = 0;
    for (const auto& r : rows) n += r.phase == phase;
    return n;
  }
};

// Two CSV series ready for plotting: the supernet training loss per weight
// step and the probe-architecture loss per probe interval.
inline void emit_curves(const TrainLog& log, const std::string& train_csv,
                        const std::string& probe_csv) {
  if (log.rows.empty()) throw std::invalid_argument("emit_curves: empty log");
  auto open = [](const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("emit_curves: cannot write " + path);
    f << "step,phase,loss,lr,wall_ms\n";
    return f;
  };
  auto ftrain = open(train_csv);
  auto fprobe = open(probe_csv);
  for (const auto& r : log.rows) {
    auto& f = r.phase == "probe" ? fprobe : ftrain;
    f << r.step << ',' << r.phase << ',' << r.loss << ',' << r.lr << ','
      << r.wall_ms << "\n";
  }
}

}  // namespace sernas::train
