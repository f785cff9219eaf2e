#pragma once

// The search-training procedures: joint optimization of architecture weights
// and model parameters on the training loss; bi-level optimization that
// alternates masked weight steps on training batches (uniform path sampling
// or uniform path dropout) with full-mixture architecture steps on validation
// batches; the random-search baseline; and final-architecture retraining with
// best-checkpoint selection by validation weighted accuracy.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sernas/ad/adam.hpp"
#include "sernas/ad/ops.hpp"
#include "sernas/harness/metrics.hpp"
#include "sernas/nn/loss.hpp"
#include "sernas/search/derive.hpp"
#include "sernas/search/mask.hpp"
#include "sernas/search/supernet.hpp"
#include "sernas/train/data.hpp"
#include "sernas/train/log.hpp"
#include "sernas/train/schedule.hpp"

namespace sernas::train {

using search::DiscreteArch;
using search::ForwardSpec;
using search::PathMask;
using search::SearchSpaceSpec;
using search::Supernet;

struct TrainOptions {
  int epochs = 1;
  int batch_size = 16;
  std::vector<double> lr_stages{1e-3, 5e-4, 2e-4, 1e-4};
  int warm_epochs = 3;
  double arch_lr = 1e-3;
  int arch_warmup_epochs = 0;
  int k = 1;  // dropout mode
  // probe of a fixed candidate architecture: every probe_interval weight
  // steps, on a fixed batch of the first probe_batch training segments
  int probe_interval = 0;  // 0 disables probing
  int probe_batch = 16;
  const PathMask* probe_mask = nullptr;
};

struct TrainAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
double to_loss(const ad::TensorPtr<T>& t) {
  return static_cast<double>(t->value[0]);
}

namespace detail {

inline std::vector<int> shuffled_indices(size_t n, RngStream rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.uniform_int(static_cast<int>(i))]);
  return idx;
}

template <typename T>
void check_finite(double loss, int64_t step, double lr, const char* where) {
  if (!std::isfinite(loss))
    throw TrainAbort(std::string(where) + ": non-finite loss " +
                     std::to_string(loss) + " at step " + std::to_string(step) +
                     " (lr=" + std::to_string(lr) + ")");
}

}  // namespace detail

// Shared trainer state: batching, probing, and logging.
template <typename T>
class TrainerBase {
 public:
  TrainerBase(Supernet<T>& net, const DataSplit& train, const TrainOptions& opt,
              RngStream rng)
      : net_(net), train_(train), opt_(opt), rng_(rng) {
    if (train_.segments.empty())
      throw std::invalid_argument("trainer: empty training data");
    if (opt_.probe_interval > 0) {
      if (!opt_.probe_mask)
        throw std::invalid_argument("trainer: probing needs a probe mask");
      const size_t pb = std::min<size_t>(opt_.probe_batch, train_.segments.size());
      std::vector<int> first(pb);
      std::iota(first.begin(), first.end(), 0);
      auto [x, y] = make_batch<T>(train_, first, 0, pb);
      probe_x_ = x;
      probe_y_ = y;
    }
  }

  const TrainLog& log() const { return log_; }
  TrainLog& log() { return log_; }
  int64_t steps() const { return step_; }
  const std::map<std::string, int64_t>& update_counts() const { return counts_; }

 protected:
  void count_updates(const std::vector<ad::TensorPtr<T>>& params) {
    for (const auto& p : params) counts_[p->name] += 1;
  }

  void maybe_probe(double lr) {
    if (opt_.probe_interval <= 0 || step_ % opt_.probe_interval != 0) return;
    ad::NoGradGuard guard;
    ForwardSpec<T> fs;
    fs.mode = PathMask::Mode::sample;
    fs.mask = opt_.probe_mask;
    auto loss = nn::softmax_xent(net_.forward(probe_x_, fs), probe_y_);
    log_.add(step_, "probe", to_loss(loss), lr);
  }

  Supernet<T>& net_;
  const DataSplit& train_;
  TrainOptions opt_;
  RngStream rng_;
  TrainLog log_;
  int64_t step_ = 0;
  std::map<std::string, int64_t> counts_;
  ad::TensorPtr<T> probe_x_;
  std::vector<int> probe_y_;
};

// Joint optimization: every step runs the full mixture on a training batch
// and updates model parameters and architecture logits together with one
// Adam step.
template <typename T>
class JointTrainer : public TrainerBase<T> {
 public:
  using Base = TrainerBase<T>;
  JointTrainer(Supernet<T>& net, const DataSplit& train, const TrainOptions& opt,
               RngStream rng)
      : Base(net, train, opt, rng),
        schedule_(opt.lr_stages, opt.warm_epochs),
        wparams_(net.model_params()),
        aparams_(net.arch_params()) {
    all_ = wparams_;
    all_.insert(all_.end(), aparams_.begin(), aparams_.end());
  }

  double step_batch(const ad::TensorPtr<T>& x, const std::vector<int>& y) {
    ad::zero_grads(all_);
    ForwardSpec<T> fs;  // full mode
    auto loss = nn::softmax_xent(this->net_.forward(x, fs), y);
    const double lv = to_loss(loss);
    detail::check_finite<T>(lv, this->step_, schedule_.rate(), "joint");
    ad::backward(loss);
    adam_.step(all_, schedule_.rate());
    this->count_updates(all_);
    ++this->step_;
    this->log_.add(this->step_, "train", lv, schedule_.rate());
    this->maybe_probe(schedule_.rate());
    return lv;
  }

  void run_epoch(int epoch_index) {
    auto order = detail::shuffled_indices(
        this->train_.segments.size(),
        this->rng_.split("epoch" + std::to_string(epoch_index)));
    const size_t B = this->opt_.batch_size;
    double sum = 0;
    int nb = 0;
    for (size_t at = 0; at + B <= order.size(); at += B) {
      auto [x, y] = make_batch<T>(this->train_, order, at, B);
      sum += step_batch(x, y);
      ++nb;
    }
    if (nb > 0) schedule_.observe_epoch(sum / nb);
  }

  void run() {
    for (int e = 0; e < this->opt_.epochs; ++e) run_epoch(e);
  }

  LRSchedule& schedule() { return schedule_; }

 private:
  LRSchedule schedule_;
  ad::AdamState<T> adam_;
  std::vector<ad::TensorPtr<T>> wparams_, aparams_, all_;
};

// Bi-level optimization. Weight steps draw a fresh path mask per step
// (sample or dropout) and update only the masked-in candidates plus fixed
// parameters under the staged schedule; architecture steps run the full
// mixture on the next validation batch and update only the logits at a
// constant rate.
template <typename T>
class BilevelTrainer : public TrainerBase<T> {
 public:
  using Base = TrainerBase<T>;
  BilevelTrainer(Supernet<T>& net, const DataSplit& train, const DataSplit& val,
                 PathMask::Mode mode, const TrainOptions& opt, RngStream rng)
      : Base(net, train, opt, rng),
        val_(val),
        mode_(mode),
        schedule_(opt.lr_stages, opt.warm_epochs),
        aparams_(net.arch_params()),
        mask_rng_(rng.split(mode == PathMask::Mode::sample ? "sample" : "dropout")),
        val_rng_(rng.split("val_stream")) {
    if (mode_ != PathMask::Mode::sample && mode_ != PathMask::Mode::dropout)
      throw std::invalid_argument("bilevel: mode must be sample or dropout");
    if (val_.segments.empty())
      throw std::invalid_argument("bilevel: empty validation set");
    all_w_ = net.model_params();
  }

  // One masked weight step on the given training batch.
  double w_step(const ad::TensorPtr<T>& x, const std::vector<int>& y) {
    auto sizes = this->net_.mixed_sizes();
    PathMask mask = mode_ == PathMask::Mode::sample
                        ? search::sample_path_mask(sizes, mask_rng_)
                        : search::dropout_path_mask(sizes, this->opt_.k, mask_rng_);
    ad::zero_grads(all_w_);
    ad::zero_grads(aparams_);
    ForwardSpec<T> fs;
    fs.mode = mode_;
    fs.mask = &mask;
    auto loss = nn::softmax_xent(this->net_.forward(x, fs), y);
    const double lv = to_loss(loss);
    detail::check_finite<T>(lv, this->step_, schedule_.rate(), "bilevel/w");
    ad::backward(loss);
    auto active = this->net_.model_params(&mask);
    w_adam_.step(active, schedule_.rate());
    this->count_updates(active);
    ++this->step_;
    this->log_.add(this->step_, "train", lv, schedule_.rate());
    this->maybe_probe(schedule_.rate());
    return lv;
  }

  // One architecture step on the next validation batch (full mixture).
  double a_step() {
    if (val_order_.empty() || val_at_ + this->opt_.batch_size > val_order_.size()) {
      val_order_ = detail::shuffled_indices(
          val_.segments.size(),
          val_rng_.split("pass" + std::to_string(val_pass_++)));
      val_at_ = 0;
    }
    const size_t B =
        std::min<size_t>(this->opt_.batch_size, val_order_.size() - val_at_);
    auto [x, y] = make_batch<T>(val_, val_order_, val_at_, B);
    val_at_ += B;
    ad::zero_grads(all_w_);
    ad::zero_grads(aparams_);
    ForwardSpec<T> fs;  // full mode
    auto loss = nn::softmax_xent(this->net_.forward(x, fs), y);
    const double lv = to_loss(loss);
    detail::check_finite<T>(lv, this->step_, this->opt_.arch_lr, "bilevel/a");
    ad::backward(loss);
    a_adam_.step(aparams_, this->opt_.arch_lr);
    return lv;
  }

  void run_epoch(int epoch_index) {
    auto order = detail::shuffled_indices(
        this->train_.segments.size(),
        this->rng_.split("epoch" + std::to_string(epoch_index)));
    const size_t B = this->opt_.batch_size;
    double sum = 0;
    int nb = 0;
    for (size_t at = 0; at + B <= order.size(); at += B) {
      auto [x, y] = make_batch<T>(this->train_, order, at, B);
      sum += w_step(x, y);
      ++nb;
      if (epoch_index >= this->opt_.arch_warmup_epochs) a_step();
    }
    if (nb > 0) schedule_.observe_epoch(sum / nb);
  }

  void run() {
    for (int e = 0; e < this->opt_.epochs; ++e) run_epoch(e);
  }

  LRSchedule& schedule() { return schedule_; }
  ad::AdamState<T>& w_adam() { return w_adam_; }

 private:
  const DataSplit& val_;
  PathMask::Mode mode_;
  LRSchedule schedule_;
  ad::AdamState<T> w_adam_, a_adam_;
  std::vector<ad::TensorPtr<T>> all_w_, aparams_;
  RngStream mask_rng_, val_rng_;
  std::vector<int> val_order_;
  size_t val_at_ = 0;
  int val_pass_ = 0;
};

// ---- evaluation -------------------------------------------------------------

// Whole-utterance evaluation: the prediction is the argmax of the class
// posterior from the single whole-spectrogram forward pass.
template <typename T>
harness::MetricsEntry evaluate(Supernet<T>& net, const DataSplit& d,
                               const ForwardSpec<T>& fs) {
  ad::NoGradGuard guard;
  std::vector<int> preds;
  for (const auto& u : d.utterances) {
    auto x = make_utterance_input<T>(u);
    auto logits = net.forward(x, fs);
    int arg = 0;
    for (int c = 1; c < logits->shape[1]; ++c)
      if (logits->value[c] > logits->value[arg]) arg = c;
    preds.push_back(arg);
  }
  return harness::compute_metrics(preds, d.utt_labels, net.num_classes);
}

// ---- spec-level entry points -------------------------------------------------

template <typename T>
struct TrainResult {
  TrainLog log;
  std::map<std::string, int64_t> update_counts;
};

template <typename T>
TrainResult<T> train_joint(Supernet<T>& net, const DataSplit& train,
                           const TrainOptions& opt, RngStream rng) {
  JointTrainer<T> tr(net, train, opt, rng);
  tr.run();
  return {tr.log(), tr.update_counts()};
}

template <typename T>
TrainResult<T> train_bilevel(Supernet<T>& net, const DataSplit& train,
                             const DataSplit& val, PathMask::Mode mode,
                             const TrainOptions& opt, RngStream rng) {
  BilevelTrainer<T> tr(net, train, val, mode, opt, rng);
  tr.run();
  return {tr.log(), tr.update_counts()};
}

// Fresh-initialized training of one discrete architecture; returns the
// checkpoint with the best validation weighted accuracy.
template <typename T>
struct RetrainResult {
  std::shared_ptr<Supernet<T>> model;  // best-checkpoint parameters restored
  double best_val_wa = 0.0;
  int best_epoch = -1;
  double final_val_wa = 0.0;
  TrainLog log;
};

template <typename T>
RetrainResult<T> retrain_selected(const SearchSpaceSpec& collapsed, int in_freq,
                                  const DataSplit& train, const DataSplit& val,
                                  const TrainOptions& opt, RngStream rng) {
  RetrainResult<T> out;
  out.model = search::build_supernet<T>(collapsed, in_freq, rng.split("init"));
  auto& net = *out.model;

  // degenerate supernet: full mode is the network itself; logits stay fixed
  JointTrainer<T> tr(net, train, opt, rng.split("train"));
  auto wparams = net.model_params();
  std::vector<T> best;
  auto snapshot = [&] {
    std::vector<T> v;
    for (const auto& p : wparams) v.insert(v.end(), p->value.begin(), p->value.end());
    return v;
  };
  auto restore = [&](const std::vector<T>& v) {
    size_t at = 0;
    for (const auto& p : wparams) {
      std::copy(v.begin() + at, v.begin() + at + p->value.size(), p->value.begin());
      at += p->value.size();
    }
  };
  for (int e = 0; e < opt.epochs; ++e) {
    tr.run_epoch(e);
    ForwardSpec<T> fs;
    const double wa = evaluate(net, val, fs).wa;
    if (wa > out.best_val_wa || out.best_epoch < 0) {
      out.best_val_wa = wa;
      out.best_epoch = e;
      best = snapshot();
    }
    out.final_val_wa = wa;
  }
  restore(best);
  out.log = tr.log();
  return out;
}

// Random-search baseline: trains n uniformly sampled discrete architectures
// with the retrain protocol and returns the one with the best validation
// weighted accuracy (its trained checkpoint included).
template <typename T>
struct RandomSearchResult {
  DiscreteArch arch;
  RetrainResult<T> trained;
};

template <typename T>
RandomSearchResult<T> random_search(const SearchSpaceSpec& space, int in_freq,
                                    const DataSplit& train, const DataSplit& val,
                                    int n_candidates, const TrainOptions& opt,
                                    RngStream rng) {
  if (n_candidates < 1)
    throw std::invalid_argument("random_search: need at least one candidate");
  auto scratch = search::build_supernet<T>(space, in_freq, rng.split("scratch"));
  auto arch_rng = rng.split("arch_draws");
  RandomSearchResult<T> best;
  bool have = false;
  for (int i = 0; i < n_candidates; ++i) {
    auto arch = search::random_architecture(*scratch, arch_rng);
    auto collapsed = search::collapse_spec(*scratch, arch);
    auto res = retrain_selected<T>(collapsed, in_freq, train, val, opt,
                                   rng.split("cand" + std::to_string(i)));
    if (!have || res.best_val_wa > best.trained.best_val_wa) {
      best.arch = std::move(arch);
      best.trained = std::move(res);
      have = true;
    }
  }
  return best;
}

}  // namespace sernas::train
