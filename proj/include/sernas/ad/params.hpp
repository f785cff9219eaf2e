#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sernas/ad/tensor.hpp"

namespace sernas::ad {

// Named collection of trainable tensors. Insertion order is preserved so that
// iteration (and therefore optimizer behaviour and logs) is deterministic.
// Keys are local to the set; the optional prefix qualifies the tensors'
// global ids.
template <typename T>
struct ParamSet {
  std::vector<std::pair<std::string, TensorPtr<T>>> items;
  std::string prefix;
  int layer_index = -1;
  int op_index = -1;

  TensorPtr<T>& add(const std::string& id, TensorPtr<T> t) {
    for (const auto& [k, v] : items)
      if (k == id)
        throw std::invalid_argument("duplicate parameter id: " + prefix + id);
    t->requires_grad = true;
    t->name = prefix + id;
    items.emplace_back(id, std::move(t));
    return items.back().second;
  }

  const TensorPtr<T>& at(const std::string& id) const {
    for (const auto& [k, v] : items)
      if (k == id) return v;
    throw std::out_of_range("no parameter named " + id);
  }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& [k, v] : items) n += v->size();
    return n;
  }

  void append_to(std::vector<TensorPtr<T>>& out) const {
    for (const auto& [k, v] : items) out.push_back(v);
  }
};

template <typename T>
void zero_grads(const std::vector<TensorPtr<T>>& params) {
  for (const auto& p : params) p->zero_grad();
}

}  // namespace sernas::ad
