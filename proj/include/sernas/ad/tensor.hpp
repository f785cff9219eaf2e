#pragma once

// Reverse-mode autodiff tape. Tensors are shared nodes in a dynamically built
// graph: every operation allocates a fresh output node holding its parents and
// a backward closure. backward() walks the recorded graph once in reverse
// topological order and accumulates gradients additively into every
// requires_grad tensor reachable from the loss.

#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sernas::ad {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Thread-local tape switch. Evaluation paths (probes, metrics, checkpoint
// scoring) run with it off and record no graph.
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool grad_enabled() { return grad_mode_flag(); }

struct NoGradGuard {
  NoGradGuard() : prev_(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
class Tensor : public std::enable_shared_from_this<Tensor<T>> {
 public:
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation; value-sized after
  bool requires_grad = false;
  std::string name;  // parameter id; empty for intermediates

  // Tape edges. backward_fn receives the node itself so closures never have
  // to capture it (that would be a reference cycle).
  std::vector<std::shared_ptr<Tensor<T>>> parents;
  std::function<void(Tensor<T>&)> backward_fn;

  static std::shared_ptr<Tensor<T>> zeros(Shape s, bool req_grad = false) {
    auto t = std::make_shared<Tensor<T>>();
    t->shape = std::move(s);
    t->value.assign(static_cast<size_t>(shape_numel(t->shape)), T(0));
    t->requires_grad = req_grad;
    return t;
  }

  static std::shared_ptr<Tensor<T>> from(Shape s, std::vector<T> v,
                                         bool req_grad = false) {
    if (shape_numel(s) != static_cast<int64_t>(v.size()))
      throw std::invalid_argument("tensor data length " + std::to_string(v.size()) +
                                  " does not match shape " + shape_str(s));
    auto t = std::make_shared<Tensor<T>>();
    t->shape = std::move(s);
    t->value = std::move(v);
    t->requires_grad = req_grad;
    return t;
  }

  static std::shared_ptr<Tensor<T>> scalar(T v) { return from({1}, {v}); }

  static std::shared_ptr<Tensor<T>> full(Shape s, T v) {
    auto t = zeros(std::move(s));
    for (auto& x : t->value) x = v;
    return t;
  }

  int64_t size() const { return static_cast<int64_t>(value.size()); }

  bool has_grad() const { return !grad.empty(); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }

  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }

  T item() const {
    if (value.size() != 1)
      throw std::runtime_error("item() requires a scalar tensor, got shape " +
                               shape_str(shape));
    return value[0];
  }

  std::shared_ptr<Tensor<T>> detach() const {
    auto t = std::make_shared<Tensor<T>>();
    t->shape = shape;
    t->value = value;
    return t;
  }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

// Allocates the output node of an operation. The backward closure is attached
// only when the tape is recording and some parent needs gradients.
template <typename T>
TensorPtr<T> make_node(Shape shape, std::vector<TensorPtr<T>> parents,
                       std::function<void(Tensor<T>&)> backward) {
  auto out = Tensor<T>::zeros(std::move(shape));
  if (grad_enabled()) {
    for (const auto& p : parents)
      if (p->requires_grad) {
        out->requires_grad = true;
        break;
      }
    if (out->requires_grad) {
      out->parents = std::move(parents);
      out->backward_fn = std::move(backward);
    }
  }
  return out;
}

// Populates grad = d loss / d tensor for every requires_grad tensor reachable
// from `loss`. Gradients accumulate additively across fan-out; callers zero
// parameter grads between steps.
template <typename T>
void backward(const TensorPtr<T>& loss) {
  if (loss->size() != 1)
    throw std::invalid_argument("gradient source must be scalar");
  if (!loss->requires_grad) return;  // nothing reachable needs gradients

  // Iterative post-order DFS: parents land before children, so the reversed
  // list runs from the loss back to the leaves.
  std::vector<Tensor<T>*> order;
  std::unordered_set<Tensor<T>*> seen;
  struct Frame {
    Tensor<T>* node;
    size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.get(), 0});
  seen.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Tensor<T>* p = f.node->parents[f.next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor<T>* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
}

}  // namespace sernas::ad
