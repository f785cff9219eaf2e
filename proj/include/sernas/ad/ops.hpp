#pragma once

// Graph operations on tape tensors. Each op validates shapes, computes the
// forward value, and attaches a backward closure that accumulates into its
// parents' grads.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sernas/ad/tensor.hpp"

namespace sernas::ad {

namespace detail {

template <typename T>
void check_same_shape(const TensorPtr<T>& a, const TensorPtr<T>& b,
                      const char* op) {
  if (a->shape != b->shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a->shape) + " vs " + shape_str(b->shape));
}

}  // namespace detail

template <typename T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  detail::check_same_shape(a, b, "add");
  auto out = make_node<T>(a->shape, {a, b}, [a, b](Tensor<T>& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) b->grad[i] += self.grad[i];
    }
  });
  for (size_t i = 0; i < out->value.size(); ++i)
    out->value[i] = a->value[i] + b->value[i];
  return out;
}

template <typename T>
TensorPtr<T> sub(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  detail::check_same_shape(a, b, "sub");
  auto out = make_node<T>(a->shape, {a, b}, [a, b](Tensor<T>& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += self.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) b->grad[i] -= self.grad[i];
    }
  });
  for (size_t i = 0; i < out->value.size(); ++i)
    out->value[i] = a->value[i] - b->value[i];
  return out;
}

template <typename T>
TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  detail::check_same_shape(a, b, "mul");
  auto out = make_node<T>(a->shape, {a, b}, [a, b](Tensor<T>& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        a->grad[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        b->grad[i] += self.grad[i] * a->value[i];
    }
  });
  for (size_t i = 0; i < out->value.size(); ++i)
    out->value[i] = a->value[i] * b->value[i];
  return out;
}

template <typename T>
TensorPtr<T> scale(const TensorPtr<T>& a, T c) {
  auto out = make_node<T>(a->shape, {a}, [a, c](Tensor<T>& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) a->grad[i] += c * self.grad[i];
  });
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = c * a->value[i];
  return out;
}

// Elementwise y = f(x), with df(x, y) giving dy/dx per element.
template <typename T, typename F, typename DF>
TensorPtr<T> unary(const TensorPtr<T>& a, F f, DF df) {
  auto out = make_node<T>(a->shape, {a}, [a, df](Tensor<T>& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      a->grad[i] += self.grad[i] * df(a->value[i], self.value[i]);
  });
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = f(a->value[i]);
  return out;
}

template <typename T>
TensorPtr<T> relu(const TensorPtr<T>& a) {
  return unary(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T, T y) { return y > T(0) ? T(1) : T(0); });
}

template <typename T>
TensorPtr<T> sigmoid(const TensorPtr<T>& a) {
  return unary(
      a,
      [](T x) {
        return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                         : std::exp(x) / (T(1) + std::exp(x));
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
TensorPtr<T> tanh_t(const TensorPtr<T>& a) {
  return unary(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
TensorPtr<T> one_minus(const TensorPtr<T>& a) {
  return unary(
      a, [](T x) { return T(1) - x; }, [](T, T) { return T(-1); });
}

template <typename T>
TensorPtr<T> sum(const TensorPtr<T>& a) {
  auto out = make_node<T>({1}, {a}, [a](Tensor<T>& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += self.grad[0];
  });
  T s = T(0);
  for (T v : a->value) s += v;
  out->value[0] = s;
  return out;
}

// C[m,n] = A[m,k] * B[k,n]
template <typename T>
TensorPtr<T> matmul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    throw std::invalid_argument("matmul: incompatible shapes " +
                                shape_str(a->shape) + " x " + shape_str(b->shape));
  const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
  auto out = make_node<T>({m, n}, {a, b}, [a, b, m, k, n](Tensor<T>& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const T g = self.grad[static_cast<size_t>(i) * n + j];
          if (g == T(0)) continue;
          for (int p = 0; p < k; ++p)
            a->grad[static_cast<size_t>(i) * k + p] +=
                g * b->value[static_cast<size_t>(p) * n + j];
        }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const T av = a->value[static_cast<size_t>(i) * k + p];
          if (av == T(0)) continue;
          for (int j = 0; j < n; ++j)
            b->grad[static_cast<size_t>(p) * n + j] +=
                av * self.grad[static_cast<size_t>(i) * n + j];
        }
    }
  });
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const T av = a->value[static_cast<size_t>(i) * k + p];
      if (av == T(0)) continue;
      for (int j = 0; j < n; ++j)
        out->value[static_cast<size_t>(i) * n + j] +=
            av * b->value[static_cast<size_t>(p) * n + j];
    }
  return out;
}

// x[rows, n] + b[n], broadcast over rows.
template <typename T>
TensorPtr<T> add_rowvec(const TensorPtr<T>& x, const TensorPtr<T>& b) {
  if (x->shape.size() != 2 || b->shape.size() != 1 || x->shape[1] != b->shape[0])
    throw std::invalid_argument("add_rowvec: shapes " + shape_str(x->shape) +
                                " and " + shape_str(b->shape));
  const int rows = x->shape[0], n = x->shape[1];
  auto out = make_node<T>(x->shape, {x, b}, [x, b, rows, n](Tensor<T>& self) {
    if (x->requires_grad) {
      x->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) x->grad[i] += self.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int r = 0; r < rows; ++r)
        for (int j = 0; j < n; ++j)
          b->grad[j] += self.grad[static_cast<size_t>(r) * n + j];
    }
  });
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < n; ++j)
      out->value[static_cast<size_t>(r) * n + j] =
          x->value[static_cast<size_t>(r) * n + j] + b->value[j];
  return out;
}

// Same values, different shape.
template <typename T>
TensorPtr<T> reshape(const TensorPtr<T>& x, Shape s) {
  if (shape_numel(s) != x->size())
    throw std::invalid_argument("reshape: cannot view " + shape_str(x->shape) +
                                " as " + shape_str(s));
  auto out = make_node<T>(std::move(s), {x}, [x](Tensor<T>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) x->grad[i] += self.grad[i];
  });
  out->value = x->value;
  return out;
}

// Scalar element v[i] of a rank-1 tensor.
template <typename T>
TensorPtr<T> pick(const TensorPtr<T>& v, int i) {
  if (v->shape.size() != 1 || i < 0 || i >= v->shape[0])
    throw std::invalid_argument("pick: index " + std::to_string(i) +
                                " out of range for " + shape_str(v->shape));
  auto out = make_node<T>({1}, {v}, [v, i](Tensor<T>& self) {
    if (!v->requires_grad) return;
    v->ensure_grad();
    v->grad[i] += self.grad[0];
  });
  out->value[0] = v->value[i];
  return out;
}

// y = s * x where s is a scalar tensor (participates in the graph).
template <typename T>
TensorPtr<T> scale_by(const TensorPtr<T>& x, const TensorPtr<T>& s) {
  if (s->size() != 1)
    throw std::invalid_argument("scale_by: scale must be scalar, got " +
                                shape_str(s->shape));
  auto out = make_node<T>(x->shape, {x, s}, [x, s](Tensor<T>& self) {
    if (x->requires_grad) {
      x->ensure_grad();
      const T sv = s->value[0];
      for (size_t i = 0; i < self.grad.size(); ++i)
        x->grad[i] += sv * self.grad[i];
    }
    if (s->requires_grad) {
      s->ensure_grad();
      T acc = T(0);
      for (size_t i = 0; i < self.grad.size(); ++i)
        acc += self.grad[i] * x->value[i];
      s->grad[0] += acc;
    }
  });
  const T sv = s->value[0];
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = sv * x->value[i];
  return out;
}

// Concatenation along axis 1; all other dims must match. Covers channel
// concat on rank-4 maps and capsule concat on rank-3 sets.
template <typename T>
TensorPtr<T> concat_axis1(const std::vector<TensorPtr<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_axis1: empty input");
  const Shape& s0 = parts[0]->shape;
  if (s0.size() < 2) throw std::invalid_argument("concat_axis1: rank must be >= 2");
  int64_t inner = 1;
  for (size_t d = 2; d < s0.size(); ++d) inner *= s0[d];
  const int outer = s0[0];
  int total = 0;
  for (const auto& p : parts) {
    if (p->shape.size() != s0.size() || p->shape[0] != outer)
      throw std::invalid_argument("concat_axis1: incompatible part shapes");
    for (size_t d = 2; d < s0.size(); ++d)
      if (p->shape[d] != s0[d])
        throw std::invalid_argument("concat_axis1: incompatible part shapes");
    total += p->shape[1];
  }
  Shape out_shape = s0;
  out_shape[1] = total;

  std::vector<TensorPtr<T>> parents(parts.begin(), parts.end());
  auto out = make_node<T>(out_shape, parents, [parts, outer, inner, total](Tensor<T>& self) {
    int64_t off = 0;
    for (const auto& p : parts) {
      const int64_t c = p->shape[1] * inner;
      if (p->requires_grad) {
        p->ensure_grad();
        for (int o = 0; o < outer; ++o) {
          const T* g = self.grad.data() + (static_cast<int64_t>(o) * total * inner + off);
          T* dst = p->grad.data() + static_cast<int64_t>(o) * c;
          for (int64_t i = 0; i < c; ++i) dst[i] += g[i];
        }
      }
      off += c;
    }
  });
  int64_t off = 0;
  for (const auto& p : parts) {
    const int64_t c = p->shape[1] * inner;
    for (int o = 0; o < outer; ++o) {
      const T* src = p->value.data() + static_cast<int64_t>(o) * c;
      T* dst = out->value.data() + (static_cast<int64_t>(o) * total * inner + off);
      for (int64_t i = 0; i < c; ++i) dst[i] = src[i];
    }
    off += c;
  }
  return out;
}

// Center crop of the two trailing spatial dims of a rank-4 map.
template <typename T>
TensorPtr<T> crop_center_hw(const TensorPtr<T>& x, int out_h, int out_w) {
  if (x->shape.size() != 4)
    throw std::invalid_argument("crop_center_hw: need rank-4, got " +
                                shape_str(x->shape));
  const int b = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
  if (out_h > h || out_w > w || out_h < 1 || out_w < 1)
    throw std::invalid_argument("crop_center_hw: target " + std::to_string(out_h) +
                                "x" + std::to_string(out_w) + " from " + shape_str(x->shape));
  if (out_h == h && out_w == w) return x;
  const int oy = (h - out_h) / 2, ox = (w - out_w) / 2;
  auto out = make_node<T>({b, c, out_h, out_w}, {x},
                          [x, b, c, h, w, out_h, out_w, oy, ox](Tensor<T>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int bi = 0; bi < b; ++bi)
      for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < out_h; ++y) {
          const int64_t src = ((static_cast<int64_t>(bi) * c + ci) * h + (y + oy)) * w + ox;
          const int64_t dst = ((static_cast<int64_t>(bi) * c + ci) * out_h + y) * out_w;
          for (int z = 0; z < out_w; ++z) x->grad[src + z] += self.grad[dst + z];
        }
  });
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y < out_h; ++y) {
        const int64_t src = ((static_cast<int64_t>(bi) * c + ci) * h + (y + oy)) * w + ox;
        const int64_t dst = ((static_cast<int64_t>(bi) * c + ci) * out_h + y) * out_w;
        for (int z = 0; z < out_w; ++z) out->value[dst + z] = x->value[src + z];
      }
  return out;
}

// x[B,T,F] -> timestep t as [B,F].
template <typename T>
TensorPtr<T> slice_time(const TensorPtr<T>& x, int t) {
  if (x->shape.size() != 3 || t < 0 || t >= x->shape[1])
    throw std::invalid_argument("slice_time: t=" + std::to_string(t) + " of " +
                                shape_str(x->shape));
  const int b = x->shape[0], tt = x->shape[1], f = x->shape[2];
  auto out = make_node<T>({b, f}, {x}, [x, t, b, tt, f](Tensor<T>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int bi = 0; bi < b; ++bi) {
      const int64_t src = (static_cast<int64_t>(bi) * tt + t) * f;
      const int64_t dst = static_cast<int64_t>(bi) * f;
      for (int j = 0; j < f; ++j) x->grad[src + j] += self.grad[dst + j];
    }
  });
  for (int bi = 0; bi < b; ++bi) {
    const int64_t src = (static_cast<int64_t>(bi) * tt + t) * f;
    const int64_t dst = static_cast<int64_t>(bi) * f;
    for (int j = 0; j < f; ++j) out->value[dst + j] = x->value[src + j];
  }
  return out;
}

// Stack T tensors of shape [B,F] into [B,T,F].
template <typename T>
TensorPtr<T> stack_time(const std::vector<TensorPtr<T>>& steps) {
  if (steps.empty()) throw std::invalid_argument("stack_time: empty input");
  const int b = steps[0]->shape[0], f = steps[0]->shape[1];
  const int tt = static_cast<int>(steps.size());
  for (const auto& s : steps)
    if (s->shape.size() != 2 || s->shape[0] != b || s->shape[1] != f)
      throw std::invalid_argument("stack_time: inconsistent step shapes");
  std::vector<TensorPtr<T>> parents(steps.begin(), steps.end());
  auto out = make_node<T>({b, tt, f}, parents, [steps, b, tt, f](Tensor<T>& self) {
    for (int t = 0; t < tt; ++t) {
      const auto& s = steps[t];
      if (!s->requires_grad) continue;
      s->ensure_grad();
      for (int bi = 0; bi < b; ++bi) {
        const int64_t src = (static_cast<int64_t>(bi) * tt + t) * f;
        const int64_t dst = static_cast<int64_t>(bi) * f;
        for (int j = 0; j < f; ++j) s->grad[dst + j] += self.grad[src + j];
      }
    }
  });
  for (int t = 0; t < tt; ++t)
    for (int bi = 0; bi < b; ++bi) {
      const int64_t dst = (static_cast<int64_t>(bi) * tt + t) * f;
      const int64_t src = static_cast<int64_t>(bi) * f;
      for (int j = 0; j < f; ++j) out->value[dst + j] = steps[t]->value[src + j];
    }
  return out;
}

// Concatenate along the last dim; leading dims must match.
template <typename T>
TensorPtr<T> concat_lastdim(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape.size() != b->shape.size() || a->shape.empty())
    throw std::invalid_argument("concat_lastdim: rank mismatch");
  for (size_t d = 0; d + 1 < a->shape.size(); ++d)
    if (a->shape[d] != b->shape[d])
      throw std::invalid_argument("concat_lastdim: leading dims differ: " +
                                  shape_str(a->shape) + " vs " + shape_str(b->shape));
  const int fa = a->shape.back(), fb = b->shape.back();
  int64_t rows = 1;
  for (size_t d = 0; d + 1 < a->shape.size(); ++d) rows *= a->shape[d];
  Shape out_shape = a->shape;
  out_shape.back() = fa + fb;
  auto out = make_node<T>(out_shape, {a, b}, [a, b, rows, fa, fb](Tensor<T>& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < fa; ++j)
          a->grad[r * fa + j] += self.grad[r * (fa + fb) + j];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < fb; ++j)
          b->grad[r * fb + j] += self.grad[r * (fa + fb) + fa + j];
    }
  });
  for (int64_t r = 0; r < rows; ++r) {
    for (int j = 0; j < fa; ++j)
      out->value[r * (fa + fb) + j] = a->value[r * fa + j];
    for (int j = 0; j < fb; ++j)
      out->value[r * (fa + fb) + fa + j] = b->value[r * fb + j];
  }
  return out;
}

// Rowwise select between two same-shape rank-2 tensors: row r of the output
// is a[r] where keep_row[r] is true, else b[r]. keep_row is a constant.
template <typename T>
TensorPtr<T> select_rows(const std::vector<uint8_t>& keep_row,
                         const TensorPtr<T>& a, const TensorPtr<T>& b) {
  detail::check_same_shape(a, b, "select_rows");
  if (a->shape.size() != 2 ||
      static_cast<int>(keep_row.size()) != a->shape[0])
    throw std::invalid_argument("select_rows: mask length must equal row count");
  const int rows = a->shape[0], n = a->shape[1];
  auto mask = keep_row;
  auto out = make_node<T>(a->shape, {a, b}, [a, b, mask, rows, n](Tensor<T>& self) {
    for (int r = 0; r < rows; ++r) {
      const auto& dst = mask[r] ? a : b;
      if (!dst->requires_grad) continue;
      dst->ensure_grad();
      for (int j = 0; j < n; ++j)
        dst->grad[static_cast<size_t>(r) * n + j] +=
            self.grad[static_cast<size_t>(r) * n + j];
    }
  });
  for (int r = 0; r < rows; ++r) {
    const auto& src = mask[r] ? a : b;
    for (int j = 0; j < n; ++j)
      out->value[static_cast<size_t>(r) * n + j] =
          src->value[static_cast<size_t>(r) * n + j];
  }
  return out;
}

// Stabilized softmax over the last dim. An optional constant 0/1 mask (same
// shape) removes entries from the normalization; a fully masked row is an
// error.
template <typename T>
TensorPtr<T> softmax_lastdim(const TensorPtr<T>& x,
                             const std::vector<uint8_t>* mask = nullptr) {
  if (x->shape.empty())
    throw std::invalid_argument("softmax_lastdim: empty vector");
  const int n = x->shape.back();
  if (n < 1) throw std::invalid_argument("softmax_lastdim: empty vector");
  int64_t rows = x->size() / n;
  if (mask && static_cast<int64_t>(mask->size()) != x->size())
    throw std::invalid_argument("softmax_lastdim: mask size mismatch");
  std::vector<uint8_t> m;
  if (mask) m = *mask;
  auto out = make_node<T>(x->shape, {x}, [x, rows, n, m](Tensor<T>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const T* y = self.value.data() + r * n;
      const T* g = self.grad.data() + r * n;
      T dot = T(0);
      for (int j = 0; j < n; ++j) dot += g[j] * y[j];
      for (int j = 0; j < n; ++j) {
        if (!m.empty() && !m[r * n + j]) continue;
        x->grad[r * n + j] += y[j] * (g[j] - dot);
      }
    }
  });
  for (int64_t r = 0; r < rows; ++r) {
    const T* in = x->value.data() + r * n;
    T* o = out->value.data() + r * n;
    T mx = T(0);
    bool any = false;
    for (int j = 0; j < n; ++j) {
      if (!m.empty() && !m[r * n + j]) continue;
      if (!any || in[j] > mx) mx = in[j];
      any = true;
    }
    if (!any)
      throw std::invalid_argument("softmax_lastdim: all entries masked in row " +
                                  std::to_string(r));
    T z = T(0);
    for (int j = 0; j < n; ++j) {
      if (!m.empty() && !m[r * n + j]) {
        o[j] = T(0);
        continue;
      }
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (int j = 0; j < n; ++j) o[j] /= z;
  }
  return out;
}

// Sum over the last dim, kept as a trailing size-1 axis.
template <typename T>
TensorPtr<T> reduce_sum_lastdim(const TensorPtr<T>& x) {
  if (x->shape.empty())
    throw std::invalid_argument("reduce_sum_lastdim: rank-0 input");
  const int n = x->shape.back();
  const int64_t rows = x->size() / n;
  Shape out_shape = x->shape;
  out_shape.back() = 1;
  auto out = make_node<T>(out_shape, {x}, [x, rows, n](Tensor<T>& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int64_t r = 0; r < rows; ++r)
      for (int j = 0; j < n; ++j) x->grad[r * n + j] += self.grad[r];
  });
  for (int64_t r = 0; r < rows; ++r) {
    T s = T(0);
    for (int j = 0; j < n; ++j) s += x->value[r * n + j];
    out->value[r] = s;
  }
  return out;
}

// x[..., D] * s[..., 1], broadcasting s over the last dim.
template <typename T>
TensorPtr<T> mul_bcast_lastdim(const TensorPtr<T>& x, const TensorPtr<T>& s) {
  if (s->shape.empty() || s->shape.back() != 1 ||
      s->shape.size() != x->shape.size())
    throw std::invalid_argument("mul_bcast_lastdim: scale must end in axis 1");
  for (size_t d = 0; d + 1 < x->shape.size(); ++d)
    if (x->shape[d] != s->shape[d])
      throw std::invalid_argument("mul_bcast_lastdim: leading dims differ");
  const int n = x->shape.back();
  const int64_t rows = x->size() / n;
  auto out = make_node<T>(x->shape, {x, s}, [x, s, rows, n](Tensor<T>& self) {
    if (x->requires_grad) {
      x->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < n; ++j)
          x->grad[r * n + j] += self.grad[r * n + j] * s->value[r];
    }
    if (s->requires_grad) {
      s->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        T acc = T(0);
        for (int j = 0; j < n; ++j)
          acc += self.grad[r * n + j] * x->value[r * n + j];
        s->grad[r] += acc;
      }
    }
  });
  for (int64_t r = 0; r < rows; ++r)
    for (int j = 0; j < n; ++j)
      out->value[r * n + j] = x->value[r * n + j] * s->value[r];
  return out;
}

}  // namespace sernas::ad
