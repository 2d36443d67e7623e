// Copyright 2026 The fsct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal reverse-mode automatic differentiation over channel-major tensors.
//
// A graph is built implicitly by the op functions below: each result node
// keeps shared ownership of its inputs and a closure that scatters its
// gradient into them. Nodes that do not depend on any trainable leaf carry no
// closure, so inference-mode forwards build no graph at all.

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fsct/error.hpp"
#include "fsct/tensor.hpp"

namespace fsct {

enum class ParamKind { kWeight, kBias, kNormScale, kNormShift, kMixRatio };

template <typename T>
struct Parameter {
  ParamKind kind = ParamKind::kWeight;
  Tensor<T> value;
  Tensor<T> grad;
  // Set when a backward pass reached this parameter since the last zero_grad().
  bool touched = false;

  Parameter() = default;
  Parameter(ParamKind k, Shape shape, T fill = T(0))
      : kind(k), value(shape, fill), grad(shape) {}

  void zero_grad() {
    grad.fill(T(0));
    touched = false;
  }
};

namespace ad {

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
  Tensor<T> own;
  const Tensor<T>* borrowed = nullptr;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<Var<T>> parents;
  std::function<void(Node&)> backward_fn;
  Parameter<T>* param = nullptr;

  const Tensor<T>& value() const { return borrowed != nullptr ? *borrowed : own; }
  const Shape& shape() const { return value().shape; }

  Tensor<T>& grad_buf() {
    if (grad.size() != value().size()) grad = Tensor<T>(value().shape);
    return grad;
  }
};

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents,
                   std::function<void(Node<T>&)> fn) {
  auto n = std::make_shared<Node<T>>();
  n->own = std::move(value);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  if (rg) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->own = std::move(value);
  return n;
}

/// Leaf bound to a parameter. A non-live leaf is the detached clone: same
/// value, but the parameter never receives gradient through it.
template <typename T>
Var<T> leaf(Parameter<T>& p, bool live) {
  auto n = std::make_shared<Node<T>>();
  n->borrowed = &p.value;
  if (live) {
    n->requires_grad = true;
    n->param = &p;
  }
  return n;
}

/// Forward-equal copy with no gradient path.
template <typename T>
Var<T> detach(const Var<T>& x) {
  return constant(x->value());
}

template <typename T>
void backward(const Var<T>& root) {
  if (!root->requires_grad) {
    throw ContractError("loss is not connected to any trainable parameter");
  }
  if (root->value().size() != 1) {
    throw ContractError("backward expects a scalar loss, got shape " + shape_str(root->shape()));
  }
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen{root.get()};
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
  while (!stack.empty()) {
    Node<T>* n = stack.back().first;
    std::size_t i = stack.back().second;
    if (i < n->parents.size()) {
      stack.back().second = i + 1;
      Node<T>* p = n->parents[i].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root->grad_buf()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->grad.size() != n->value().size()) continue;
    if (n->backward_fn) n->backward_fn(*n);
    if (n->param != nullptr) {
      auto& pg = n->param->grad;
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n->grad[k];
      n->param->touched = true;
    }
  }
}

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <typename T, typename F, typename D>
Var<T> map_unary(const Var<T>& x, F f, D df) {
  const auto& xv = x->value();
  Tensor<T> y(xv.shape);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_result<T>(std::move(y), {x}, [df](Node<T>& out) {
    auto& in = *out.parents[0];
    const auto& xv = in.value();
    const auto& yv = out.value();
    auto& gx = in.grad_buf();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += out.grad[i] * df(xv[i], yv[i]);
  });
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void im2col(const T* x, int channels, int height, int width, int k, int stride, int out_h,
            int out_w, T* cols) {
  const int hw = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = cols + static_cast<std::size_t>((c * k + ki) * k + kj) * hw;
        for (int oy = 0; oy < out_h; ++oy) {
          const T* src = x + (static_cast<std::size_t>(c) * height + oy * stride + ki) * width + kj;
          for (int ox = 0; ox < out_w; ++ox) row[oy * out_w + ox] = src[ox * stride];
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int channels, int height, int width, int k, int stride, int out_h,
                int out_w, T* x) {
  const int hw = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = cols + static_cast<std::size_t>((c * k + ki) * k + kj) * hw;
        for (int oy = 0; oy < out_h; ++oy) {
          T* dst = x + (static_cast<std::size_t>(c) * height + oy * stride + ki) * width + kj;
          for (int ox = 0; ox < out_w; ++ox) dst[ox * stride] += row[oy * out_w + ox];
        }
      }
    }
  }
}

inline int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

// Normalizes `groups` equal contiguous slices to zero mean / unit variance.
template <typename T>
Var<T> normalize_slices(const Var<T>& x, int groups, T eps) {
  const auto& xv = x->value();
  const std::size_t n = xv.size() / static_cast<std::size_t>(groups);
  Tensor<T> y(xv.shape);
  std::vector<T> inv_std(static_cast<std::size_t>(groups));
  for (int g = 0; g < groups; ++g) {
    const T* src = xv.ptr() + g * n;
    T mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += src[i];
    mean /= static_cast<T>(n);
    T var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<T>(n);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[g] = is;
    T* dst = y.ptr() + g * n;
    for (std::size_t i = 0; i < n; ++i) dst[i] = (src[i] - mean) * is;
  }
  return make_result<T>(std::move(y), {x}, [groups, n, inv_std](Node<T>& out) {
    auto& gx = out.parents[0]->grad_buf();
    const auto& yv = out.value();
    for (int g = 0; g < groups; ++g) {
      const T* gy = out.grad.ptr() + g * n;
      const T* yy = yv.ptr() + g * n;
      T sum_g = 0, sum_gy = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sum_g += gy[i];
        sum_gy += gy[i] * yy[i];
      }
      const T scale = inv_std[g] / static_cast<T>(n);
      T* dst = gx.ptr() + g * n;
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] += scale * (static_cast<T>(n) * gy[i] - sum_g - yy[i] * sum_gy);
      }
    }
  });
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

template <typename T>
Var<T> relu(const Var<T>& x) {
  return detail::map_unary<T>(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  return detail::map_unary<T>(
      x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return detail::map_unary<T>(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::map_unary<T>(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> log(const Var<T>& x) {
  for (T v : x->value().data) {
    if (!(v > T(0))) throw ContractError("log of non-positive value");
  }
  return detail::map_unary<T>(
      x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Var<T> square(const Var<T>& x) {
  return detail::map_unary<T>(
      x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Var<T> abs(const Var<T>& x) {
  return detail::map_unary<T>(
      x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  return detail::map_unary<T>(
      x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

/// y = a * x + b
template <typename T>
Var<T> affine(const Var<T>& x, T a, T b) {
  return detail::map_unary<T>(
      x, [a, b](T v) { return a * v + b; }, [a](T, T) { return a; });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a->shape(), b->shape(), "add");
  Tensor<T> y(a->shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->value()[i] + b->value()[i];
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& out) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *out.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buf();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a->shape(), b->shape(), "sub");
  Tensor<T> y(a->shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->value()[i] - b->value()[i];
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& out) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *out.parents[k];
      if (!p.requires_grad) continue;
      const T sign = k == 0 ? T(1) : T(-1);
      auto& g = p.grad_buf();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * out.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a->shape(), b->shape(), "mul");
  Tensor<T> y(a->shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a->value()[i] * b->value()[i];
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& out) {
    auto& a = *out.parents[0];
    auto& b = *out.parents[1];
    if (a.requires_grad) {
      auto& g = a.grad_buf();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * b.value()[i];
    }
    if (b.requires_grad) {
      auto& g = b.grad_buf();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * a.value()[i];
    }
  });
}

template <typename T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T>
Var<T> operator*(T s, const Var<T>& x) { return affine(x, s, T(0)); }
template <typename T>
Var<T> operator*(const Var<T>& x, T s) { return affine(x, s, T(0)); }
template <typename T>
Var<T> operator+(const Var<T>& x, T s) { return affine(x, T(1), s); }
template <typename T>
Var<T> operator-(const Var<T>& x, T s) { return affine(x, T(1), -s); }
template <typename T>
Var<T> operator-(T s, const Var<T>& x) { return affine(x, T(-1), s); }

// ---- per-channel broadcasting ---------------------------------------------

/// x[c, ...] * v[c]
template <typename T>
Var<T> channel_mul(const Var<T>& x, const Var<T>& v) {
  const int c = x->shape().at(0);
  if (v->value().size() != static_cast<std::size_t>(c)) {
    throw ShapeError("channel_mul: vector length " + std::to_string(v->value().size()) +
                     " != channels " + std::to_string(c));
  }
  const std::size_t inner = x->value().size() / c;
  Tensor<T> y(x->shape());
  for (int ch = 0; ch < c; ++ch) {
    const T s = v->value()[ch];
    for (std::size_t i = 0; i < inner; ++i) y[ch * inner + i] = x->value()[ch * inner + i] * s;
  }
  return make_result<T>(std::move(y), {x, v}, [c, inner](Node<T>& out) {
    auto& xn = *out.parents[0];
    auto& vn = *out.parents[1];
    if (xn.requires_grad) {
      auto& g = xn.grad_buf();
      for (int ch = 0; ch < c; ++ch) {
        const T s = vn.value()[ch];
        for (std::size_t i = 0; i < inner; ++i) g[ch * inner + i] += out.grad[ch * inner + i] * s;
      }
    }
    if (vn.requires_grad) {
      auto& g = vn.grad_buf();
      for (int ch = 0; ch < c; ++ch) {
        T acc = 0;
        for (std::size_t i = 0; i < inner; ++i) {
          acc += out.grad[ch * inner + i] * xn.value()[ch * inner + i];
        }
        g[ch] += acc;
      }
    }
  });
}

/// x[c, ...] + v[c]
template <typename T>
Var<T> channel_add(const Var<T>& x, const Var<T>& v) {
  const int c = x->shape().at(0);
  if (v->value().size() != static_cast<std::size_t>(c)) {
    throw ShapeError("channel_add: vector length mismatch");
  }
  const std::size_t inner = x->value().size() / c;
  Tensor<T> y(x->shape());
  for (int ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < inner; ++i) {
      y[ch * inner + i] = x->value()[ch * inner + i] + v->value()[ch];
    }
  }
  return make_result<T>(std::move(y), {x, v}, [c, inner](Node<T>& out) {
    auto& xn = *out.parents[0];
    auto& vn = *out.parents[1];
    if (xn.requires_grad) {
      auto& g = xn.grad_buf();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
    }
    if (vn.requires_grad) {
      auto& g = vn.grad_buf();
      for (int ch = 0; ch < c; ++ch) {
        T acc = 0;
        for (std::size_t i = 0; i < inner; ++i) acc += out.grad[ch * inner + i];
        g[ch] += acc;
      }
    }
  });
}

// ---- normalization ---------------------------------------------------------

inline constexpr double kNormEps = 1e-5;

/// Per-channel normalization over spatial positions (no affine).
template <typename T>
Var<T> instance_norm(const Var<T>& x) {
  return detail::normalize_slices<T>(x, x->shape().at(0), static_cast<T>(kNormEps));
}

/// Normalization over all channels and positions jointly (no affine).
template <typename T>
Var<T> layer_norm(const Var<T>& x) {
  return detail::normalize_slices<T>(x, 1, static_cast<T>(kNormEps));
}

// ---- shape ops -------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  if (numel(shape) != x->value().size()) {
    throw ShapeError("reshape: " + shape_str(x->shape()) + " -> " + shape_str(shape));
  }
  Tensor<T> y(std::move(shape), x->value().data);
  return make_result<T>(std::move(y), {x}, [](Node<T>& out) {
    auto& g = out.parents[0]->grad_buf();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
  });
}

/// Concatenation along the leading dimension.
template <typename T>
Var<T> concat(const Var<T>& a, const Var<T>& b) {
  Shape sa = a->shape(), sb = b->shape();
  if (sa.size() != sb.size() || !std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1)) {
    throw ShapeError("concat: " + shape_str(sa) + " vs " + shape_str(sb));
  }
  Shape so = sa;
  so[0] += sb[0];
  Tensor<T> y(so);
  std::copy(a->value().data.begin(), a->value().data.end(), y.data.begin());
  std::copy(b->value().data.begin(), b->value().data.end(), y.data.begin() + a->value().size());
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& out) {
    auto& an = *out.parents[0];
    auto& bn = *out.parents[1];
    const std::size_t na = an.value().size();
    if (an.requires_grad) {
      auto& g = an.grad_buf();
      for (std::size_t i = 0; i < na; ++i) g[i] += out.grad[i];
    }
    if (bn.requires_grad) {
      auto& g = bn.grad_buf();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[na + i];
    }
  });
}

template <typename T>
Var<T> reflect_pad(const Var<T>& x, int pad) {
  const auto& s = x->shape();
  const int c = s.at(0), h = s.at(1), w = s.at(2);
  if (pad >= h || pad >= w) {
    throw ShapeError("reflect_pad: padding " + std::to_string(pad) + " too large for " +
                     shape_str(s));
  }
  const int ho = h + 2 * pad, wo = w + 2 * pad;
  Tensor<T> y({c, ho, wo});
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < ho; ++i) {
      const int si = detail::reflect_index(i - pad, h);
      for (int j = 0; j < wo; ++j) {
        const int sj = detail::reflect_index(j - pad, w);
        y[(static_cast<std::size_t>(ch) * ho + i) * wo + j] =
            x->value()[(static_cast<std::size_t>(ch) * h + si) * w + sj];
      }
    }
  }
  return make_result<T>(std::move(y), {x}, [c, h, w, ho, wo, pad](Node<T>& out) {
    auto& g = out.parents[0]->grad_buf();
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < ho; ++i) {
        const int si = detail::reflect_index(i - pad, h);
        for (int j = 0; j < wo; ++j) {
          const int sj = detail::reflect_index(j - pad, w);
          g[(static_cast<std::size_t>(ch) * h + si) * w + sj] +=
              out.grad[(static_cast<std::size_t>(ch) * ho + i) * wo + j];
        }
      }
    }
  });
}

template <typename T>
Var<T> upsample_nearest2(const Var<T>& x) {
  const auto& s = x->shape();
  const int c = s.at(0), h = s.at(1), w = s.at(2);
  Tensor<T> y({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < 2 * h; ++i) {
      for (int j = 0; j < 2 * w; ++j) {
        y[(static_cast<std::size_t>(ch) * 2 * h + i) * 2 * w + j] =
            x->value()[(static_cast<std::size_t>(ch) * h + i / 2) * w + j / 2];
      }
    }
  }
  return make_result<T>(std::move(y), {x}, [c, h, w](Node<T>& out) {
    auto& g = out.parents[0]->grad_buf();
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < 2 * h; ++i) {
        for (int j = 0; j < 2 * w; ++j) {
          g[(static_cast<std::size_t>(ch) * h + i / 2) * w + j / 2] +=
              out.grad[(static_cast<std::size_t>(ch) * 2 * h + i) * 2 * w + j];
        }
      }
    }
  });
}

// ---- pooling / reductions --------------------------------------------------

/// [C, H, W] -> [C]
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const int c = x->shape().at(0);
  const std::size_t inner = x->value().size() / c;
  Tensor<T> y({c});
  for (int ch = 0; ch < c; ++ch) {
    T acc = 0;
    for (std::size_t i = 0; i < inner; ++i) acc += x->value()[ch * inner + i];
    y[ch] = acc / static_cast<T>(inner);
  }
  return make_result<T>(std::move(y), {x}, [c, inner](Node<T>& out) {
    auto& g = out.parents[0]->grad_buf();
    for (int ch = 0; ch < c; ++ch) {
      const T v = out.grad[ch] / static_cast<T>(inner);
      for (std::size_t i = 0; i < inner; ++i) g[ch * inner + i] += v;
    }
  });
}

/// [C, H, W] -> [C]
template <typename T>
Var<T> global_max_pool(const Var<T>& x) {
  const int c = x->shape().at(0);
  const std::size_t inner = x->value().size() / c;
  Tensor<T> y({c});
  std::vector<std::size_t> arg(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < inner; ++i) {
      if (x->value()[ch * inner + i] > x->value()[ch * inner + best]) best = i;
    }
    arg[ch] = ch * inner + best;
    y[ch] = x->value()[arg[ch]];
  }
  return make_result<T>(std::move(y), {x}, [arg](Node<T>& out) {
    auto& g = out.parents[0]->grad_buf();
    for (std::size_t ch = 0; ch < arg.size(); ++ch) g[arg[ch]] += out.grad[ch];
  });
}

/// [C, H, W] -> [1, H, W]
template <typename T>
Var<T> channel_sum(const Var<T>& x) {
  const auto& s = x->shape();
  const int c = s.at(0);
  const std::size_t inner = x->value().size() / c;
  Shape so = s;
  so[0] = 1;
  Tensor<T> y(so);
  for (int ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < inner; ++i) y[i] += x->value()[ch * inner + i];
  }
  return make_result<T>(std::move(y), {x}, [c, inner](Node<T>& out) {
    auto& g = out.parents[0]->grad_buf();
    for (int ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < inner; ++i) g[ch * inner + i] += out.grad[i];
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T acc = 0;
  for (T v : x->value().data) acc += v;
  return make_result<T>(Tensor<T>({1}, acc), {x}, [](Node<T>& out) {
    auto& g = out.parents[0]->grad_buf();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const std::size_t n = x->value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  T acc = 0;
  for (T v : x->value().data) acc += v;
  return make_result<T>(Tensor<T>({1}, acc / static_cast<T>(n)), {x}, [n](Node<T>& out) {
    auto& g = out.parents[0]->grad_buf();
    const T v = out.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += v;
  });
}

template <typename T>
Var<T> dot(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a->shape(), b->shape(), "dot");
  T acc = 0;
  for (std::size_t i = 0; i < a->value().size(); ++i) acc += a->value()[i] * b->value()[i];
  return make_result<T>(Tensor<T>({1}, acc), {a, b}, [](Node<T>& out) {
    auto& an = *out.parents[0];
    auto& bn = *out.parents[1];
    const T g0 = out.grad[0];
    if (an.requires_grad) {
      auto& g = an.grad_buf();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += g0 * bn.value()[i];
    }
    if (bn.requires_grad) {
      auto& g = bn.grad_buf();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += g0 * an.value()[i];
    }
  });
}

template <typename T>
Var<T> l2_normalize(const Var<T>& x) {
  T sq = 0;
  for (T v : x->value().data) sq += v * v;
  const T norm = std::sqrt(sq);
  if (!(norm > T(0))) throw ContractError("l2_normalize: zero-norm vector");
  Tensor<T> y(x->shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x->value()[i] / norm;
  return make_result<T>(std::move(y), {x}, [norm](Node<T>& out) {
    auto& g = out.parents[0]->grad_buf();
    const auto& yv = out.value();
    T yg = 0;
    for (std::size_t i = 0; i < yv.size(); ++i) yg += yv[i] * out.grad[i];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += (out.grad[i] - yv[i] * yg) / norm;
  });
}

/// Numerically stable log-softmax over a rank-1 tensor.
template <typename T>
Var<T> log_softmax(const Var<T>& x) {
  const auto& xv = x->value();
  if (xv.empty()) throw ShapeError("log_softmax of an empty vector");
  T mx = xv[0];
  for (T v : xv.data) mx = std::max(mx, v);
  T z = 0;
  for (T v : xv.data) z += std::exp(v - mx);
  const T lse = mx + std::log(z);
  Tensor<T> y(xv.shape);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] - lse;
  return make_result<T>(std::move(y), {x}, [](Node<T>& out) {
    auto& g = out.parents[0]->grad_buf();
    const auto& yv = out.value();
    T gs = 0;
    for (std::size_t i = 0; i < yv.size(); ++i) gs += out.grad[i];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] - std::exp(yv[i]) * gs;
  });
}

template <typename T>
Var<T> pick(const Var<T>& x, std::size_t index) {
  if (index >= x->value().size()) {
    throw ShapeError("pick: index " + std::to_string(index) + " out of range");
  }
  return make_result<T>(Tensor<T>({1}, x->value()[index]), {x}, [index](Node<T>& out) {
    out.parents[0]->grad_buf()[index] += out.grad[0];
  });
}

// ---- dense layers ----------------------------------------------------------

/// Valid (unpadded) 2-D convolution. x: [C, H, W], w: [O, C, k, k], b: [O] or null.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride) {
  const auto& xs = x->shape();
  const auto& ws = w->shape();
  if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || ws[2] != ws[3]) {
    throw ShapeError("conv2d: input " + shape_str(xs) + " incompatible with kernel " +
                     shape_str(ws));
  }
  const int c = xs[0], h = xs[1], wd = xs[2];
  const int o = ws[0], k = ws[2];
  if (h < k || wd < k) throw ShapeError("conv2d: input smaller than kernel " + shape_str(xs));
  const int ho = (h - k) / stride + 1, wo = (wd - k) / stride + 1;
  const int ckk = c * k * k, hw = ho * wo;
  using M = detail::RowMat<T>;
  std::vector<T> cols(static_cast<std::size_t>(ckk) * hw);
  detail::im2col(x->value().ptr(), c, h, wd, k, stride, ho, wo, cols.data());
  Tensor<T> y({o, ho, wo});
  Eigen::Map<const M> wm(w->value().ptr(), o, ckk);
  Eigen::Map<const M> cm(cols.data(), ckk, hw);
  Eigen::Map<M> ym(y.ptr(), o, hw);
  ym.noalias() = wm * cm;
  if (b) {
    if (b->value().size() != static_cast<std::size_t>(o)) throw ShapeError("conv2d: bias length");
    for (int r = 0; r < o; ++r) ym.row(r).array() += b->value()[r];
  }
  std::vector<Var<T>> parents{x, w};
  if (b) parents.push_back(b);
  return make_result<T>(std::move(y), std::move(parents),
                        [=](Node<T>& out) {
                          auto& xn = *out.parents[0];
                          auto& wn = *out.parents[1];
                          Eigen::Map<const M> gm(out.grad.ptr(), o, hw);
                          if (wn.requires_grad) {
                            std::vector<T> cl(static_cast<std::size_t>(ckk) * hw);
                            detail::im2col(xn.value().ptr(), c, h, wd, k, stride, ho, wo,
                                           cl.data());
                            Eigen::Map<const M> clm(cl.data(), ckk, hw);
                            Eigen::Map<M> gw(wn.grad_buf().ptr(), o, ckk);
                            gw.noalias() += gm * clm.transpose();
                          }
                          if (out.parents.size() > 2 && out.parents[2]->requires_grad) {
                            auto& gb = out.parents[2]->grad_buf();
                            for (int r = 0; r < o; ++r) gb[r] += gm.row(r).sum();
                          }
                          if (xn.requires_grad) {
                            std::vector<T> dc(static_cast<std::size_t>(ckk) * hw);
                            Eigen::Map<M> dcm(dc.data(), ckk, hw);
                            Eigen::Map<const M> wm2(wn.value().ptr(), o, ckk);
                            dcm.noalias() = wm2.transpose() * gm;
                            detail::col2im_add(dc.data(), c, h, wd, k, stride, ho, wo,
                                               xn.grad_buf().ptr());
                          }
                        });
}

/// y = W x + b. x: [N], w: [O, N], b: [O] or null.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const auto& ws = w->shape();
  const std::size_t n = x->value().size();
  if (ws.size() != 2 || static_cast<std::size_t>(ws[1]) != n) {
    throw ShapeError("linear: input of size " + std::to_string(n) + " incompatible with " +
                     shape_str(ws));
  }
  const int o = ws[0];
  using M = detail::RowMat<T>;
  using V = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  Tensor<T> y({o});
  Eigen::Map<const M> wm(w->value().ptr(), o, static_cast<Eigen::Index>(n));
  Eigen::Map<const V> xv(x->value().ptr(), static_cast<Eigen::Index>(n));
  Eigen::Map<V> yv(y.ptr(), o);
  yv.noalias() = wm * xv;
  if (b) {
    if (b->value().size() != static_cast<std::size_t>(o)) throw ShapeError("linear: bias length");
    for (int r = 0; r < o; ++r) y[r] += b->value()[r];
  }
  std::vector<Var<T>> parents{x, w};
  if (b) parents.push_back(b);
  return make_result<T>(std::move(y), std::move(parents), [o, n](Node<T>& out) {
    auto& xn = *out.parents[0];
    auto& wn = *out.parents[1];
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::Map<const V> g(out.grad.ptr(), o);
    if (wn.requires_grad) {
      Eigen::Map<M> gw(wn.grad_buf().ptr(), o, ni);
      Eigen::Map<const V> xv(xn.value().ptr(), ni);
      gw.noalias() += g * xv.transpose();
    }
    if (out.parents.size() > 2 && out.parents[2]->requires_grad) {
      auto& gb = out.parents[2]->grad_buf();
      for (int r = 0; r < o; ++r) gb[r] += g[r];
    }
    if (xn.requires_grad) {
      Eigen::Map<const M> wm(wn.value().ptr(), o, ni);
      Eigen::Map<V> gx(xn.grad_buf().ptr(), ni);
      gx.noalias() += wm.transpose() * g;
    }
  });
}

}  // namespace ad
}  // namespace fsct
