// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal deterministic tensor engine with reverse-mode autodiff.
// Values are flat row-major arrays; every op appends its backward rule to a
// per-thread tape which is replayed in reverse by backward(). The scalar type
// is a template parameter: float for training throughput, double for
// gradient checking.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

#include "ravg/common.hpp"
#include "ravg/thread_pool.hpp"

namespace ravg {

// elementwise loops below this size run serially
inline constexpr std::size_t kParallelGrain = 16384;

template <class S>
struct TensorStore {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // empty until first accumulation
  bool requires_grad = false;
};

template <class S>
class TensorT {
 public:
  TensorT() = default;

  static TensorT zeros(Shape shape) {
    TensorT t;
    t.d_ = std::make_shared<TensorStore<S>>();
    t.d_->value.assign(shape_numel(shape), S(0));
    t.d_->shape = std::move(shape);
    return t;
  }

  static TensorT full(Shape shape, S v) {
    TensorT t = zeros(std::move(shape));
    std::fill(t.d_->value.begin(), t.d_->value.end(), v);
    return t;
  }

  static TensorT from(Shape shape, std::vector<S> values) {
    require(shape_numel(shape) == values.size(),
            "tensor data length does not match shape " + shape_str(shape));
    TensorT t;
    t.d_ = std::make_shared<TensorStore<S>>();
    t.d_->shape = std::move(shape);
    t.d_->value = std::move(values);
    return t;
  }

  static TensorT scalar(S v) { return full({}, v); }

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  std::size_t size() const { return d_->value.size(); }
  std::size_t dim(std::size_t i) const { return d_->shape.at(i); }
  std::size_t rank() const { return d_->shape.size(); }

  S* data() { return d_->value.data(); }
  const S* data() const { return d_->value.data(); }
  std::vector<S>& values() { return d_->value; }
  const std::vector<S>& values() const { return d_->value; }

  S item() const {
    require(size() == 1, "item() requires a single-element tensor");
    return d_->value[0];
  }

  bool requires_grad() const { return d_->requires_grad; }
  TensorT& set_requires_grad(bool rg) {
    d_->requires_grad = rg;
    return *this;
  }

  bool has_grad() const { return !d_->grad.empty(); }
  const std::vector<S>& grad() const { return d_->grad; }
  std::vector<S>& grad_buffer() {
    if (d_->grad.empty()) d_->grad.assign(d_->value.size(), S(0));
    return d_->grad;
  }
  void clear_grad() { d_->grad.clear(); }

  // Deep copy of values; grad state is not copied.
  TensorT clone() const {
    TensorT t = from(d_->shape, d_->value);
    return t;
  }

  std::shared_ptr<TensorStore<S>> store() const { return d_; }

 private:
  std::shared_ptr<TensorStore<S>> d_;
};

// ---------------------------------------------------------------------------
// Tape and grad mode

namespace detail {
inline thread_local int nograd_depth = 0;
}

struct NoGradGuard {
  NoGradGuard() { ++detail::nograd_depth; }
  ~NoGradGuard() { --detail::nograd_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::nograd_depth == 0; }

template <class S>
class TapeT {
 public:
  static TapeT& current() {
    static thread_local TapeT tape;
    return tape;
  }

  void record(std::function<void()> step) { steps_.push_back(std::move(step)); }
  std::size_t size() const { return steps_.size(); }
  void clear() {
    steps_.clear();
    steps_.shrink_to_fit();
  }

  // Seeds d(loss)/d(loss) = 1 and replays recorded steps in reverse order.
  // Gradients accumulate additively; the tape is cleared afterward.
  void backward_from(TensorT<S>& loss) {
    require(loss.size() == 1, "backward requires a scalar loss");
    loss.grad_buffer()[0] += S(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    clear();
  }

 private:
  std::vector<std::function<void()>> steps_;
};

template <class S>
void backward(TensorT<S>& loss) {
  TapeT<S>::current().backward_from(loss);
}

namespace detail {

template <class S>
bool track(const TensorT<S>& a) {
  return grad_enabled() && a.requires_grad();
}

template <class S>
std::vector<S>& ensure_grad(const std::shared_ptr<TensorStore<S>>& d) {
  if (d->grad.empty()) d->grad.assign(d->value.size(), S(0));
  return d->grad;
}

template <class S>
void require_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops. Binary ops require equal shapes; scalar right-hand sides
// broadcast over the whole tensor.

template <class S, class Fwd, class Bwd>
TensorT<S> ew_binary(const TensorT<S>& a, const TensorT<S>& b, const char* name,
                     Fwd fwd, Bwd bwd) {
  detail::require_same_shape(a, b, name);
  TensorT<S> out = TensorT<S>::zeros(a.shape());
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();
  const std::size_t n = a.size();
  parallel_chunks(n, kParallelGrain, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) po[i] = fwd(pa[i], pb[i]);
  });
  if (detail::track(a) || detail::track(b)) {
    out.set_requires_grad(true);
    auto ad = a.store(), bd = b.store(), od = out.store();
    TapeT<S>::current().record([ad, bd, od, bwd] {
      if (od->grad.empty()) return;
      const std::size_t n = od->value.size();
      S* ga = ad->requires_grad ? detail::ensure_grad(ad).data() : nullptr;
      S* gb = bd->requires_grad ? detail::ensure_grad(bd).data() : nullptr;
      parallel_chunks(n, kParallelGrain, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          S da, db;
          bwd(ad->value[i], bd->value[i], od->grad[i], da, db);
          if (ga) ga[i] += da;
          if (gb) gb[i] += db;
        }
      });
    });
  }
  return out;
}

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  return ew_binary(
      a, b, "add", [](S x, S y) { return x + y; },
      [](S, S, S g, S& da, S& db) { da = g; db = g; });
}

template <class S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  return ew_binary(
      a, b, "sub", [](S x, S y) { return x - y; },
      [](S, S, S g, S& da, S& db) { da = g; db = -g; });
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  return ew_binary(
      a, b, "mul", [](S x, S y) { return x * y; },
      [](S x, S y, S g, S& da, S& db) { da = g * y; db = g * x; });
}

// Division guards the denominator: |b| < eps is replaced by +-eps in both the
// forward value and the backward rule.
template <class S>
TensorT<S> div(const TensorT<S>& a, const TensorT<S>& b, double eps = 1e-12) {
  const S e = static_cast<S>(eps);
  auto guard = [e](S y) { return std::abs(y) < e ? (y < S(0) ? -e : e) : y; };
  return ew_binary(
      a, b, "div", [guard](S x, S y) { return x / guard(y); },
      [guard](S x, S y, S g, S& da, S& db) {
        const S d = guard(y);
        da = g / d;
        db = -g * x / (d * d);
      });
}

template <class S>
TensorT<S> maximum(const TensorT<S>& a, const TensorT<S>& b) {
  return ew_binary(
      a, b, "max", [](S x, S y) { return x >= y ? x : y; },
      [](S x, S y, S g, S& da, S& db) {
        da = x >= y ? g : S(0);  // ties route to the first operand
        db = x >= y ? S(0) : g;
      });
}

template <class S>
TensorT<S> minimum(const TensorT<S>& a, const TensorT<S>& b) {
  return ew_binary(
      a, b, "min", [](S x, S y) { return x <= y ? x : y; },
      [](S x, S y, S g, S& da, S& db) {
        da = x <= y ? g : S(0);
        db = x <= y ? S(0) : g;
      });
}

// Scalar right-hand-side forms materialize a constant tensor.
template <class S> TensorT<S> add(const TensorT<S>& a, double s) { return add(a, TensorT<S>::full(a.shape(), static_cast<S>(s))); }
template <class S> TensorT<S> sub(const TensorT<S>& a, double s) { return sub(a, TensorT<S>::full(a.shape(), static_cast<S>(s))); }
template <class S> TensorT<S> sub(double s, const TensorT<S>& a) { return sub(TensorT<S>::full(a.shape(), static_cast<S>(s)), a); }
template <class S> TensorT<S> mul(const TensorT<S>& a, double s) { return mul(a, TensorT<S>::full(a.shape(), static_cast<S>(s))); }
template <class S> TensorT<S> div(const TensorT<S>& a, double s) { return div(a, TensorT<S>::full(a.shape(), static_cast<S>(s))); }
template <class S> TensorT<S> maximum(const TensorT<S>& a, double s) { return maximum(a, TensorT<S>::full(a.shape(), static_cast<S>(s))); }
template <class S> TensorT<S> minimum(const TensorT<S>& a, double s) { return minimum(a, TensorT<S>::full(a.shape(), static_cast<S>(s))); }

template <class S, class Fwd, class Bwd>
TensorT<S> ew_unary(const TensorT<S>& a, Fwd fwd, Bwd bwd) {
  TensorT<S> out = TensorT<S>::zeros(a.shape());
  const S* pa = a.data();
  S* po = out.data();
  const std::size_t n = a.size();
  parallel_chunks(n, kParallelGrain, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) po[i] = fwd(pa[i]);
  });
  if (detail::track(a)) {
    out.set_requires_grad(true);
    auto ad = a.store(), od = out.store();
    TapeT<S>::current().record([ad, od, bwd] {
      if (od->grad.empty()) return;
      S* ga = detail::ensure_grad(ad).data();
      const std::size_t n = od->value.size();
      parallel_chunks(n, kParallelGrain, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
          ga[i] += bwd(ad->value[i], od->value[i]) * od->grad[i];
      });
    });
  }
  return out;
}

template <class S>
TensorT<S> exp(const TensorT<S>& a) {
  return ew_unary(
      a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

// log clamps its argument at 1e-12 so finite inputs never produce NaN.
template <class S>
TensorT<S> log(const TensorT<S>& a) {
  const S e = static_cast<S>(1e-12);
  return ew_unary(
      a, [e](S x) { return std::log(x < e ? e : x); },
      [e](S x, S) { return S(1) / (x < e ? e : x); });
}

template <class S>
TensorT<S> abs(const TensorT<S>& a) {
  return ew_unary(
      a, [](S x) { return std::abs(x); },
      [](S x, S) { return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0)); });
}

// Non-integral exponents clamp the base at 0 (and at 1e-12 in the derivative).
template <class S>
TensorT<S> pow(const TensorT<S>& a, double p) {
  const bool integral = p == std::floor(p);
  const S sp = static_cast<S>(p);
  return ew_unary(
      a,
      [integral, sp](S x) {
        return integral ? std::pow(x, sp) : std::pow(x < S(0) ? S(0) : x, sp);
      },
      [integral, sp](S x, S) {
        S base = integral ? x : (x < S(1e-12) ? S(1e-12) : x);
        return sp * std::pow(base, sp - S(1));
      });
}

// Gradient passes through where lo <= value <= hi.
template <class S>
TensorT<S> clamp(const TensorT<S>& a, double lo, double hi) {
  const S l = static_cast<S>(lo), h = static_cast<S>(hi);
  return ew_unary(
      a, [l, h](S x) { return x < l ? l : (x > h ? h : x); },
      [l, h](S x, S) { return (x >= l && x <= h) ? S(1) : S(0); });
}

template <class S>
TensorT<S> relu(const TensorT<S>& a) {
  return ew_unary(
      a, [](S x) { return x > S(0) ? x : S(0); },
      [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

template <class S>
TensorT<S> leaky_relu(const TensorT<S>& a, double slope = 0.01) {
  const S k = static_cast<S>(slope);
  return ew_unary(
      a, [k](S x) { return x > S(0) ? x : k * x; },
      [k](S x, S) { return x > S(0) ? S(1) : k; });
}

template <class S>
TensorT<S> sigmoid(const TensorT<S>& a) {
  return ew_unary(
      a,
      [](S x) {
        // Split by sign for stability.
        if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
        const S e = std::exp(x);
        return e / (S(1) + e);
      },
      [](S, S y) { return y * (S(1) - y); });
}

// ---------------------------------------------------------------------------
// Reductions over a set of axes (result drops those axes; reducing everything
// yields a rank-0 scalar). max/min route the gradient to the first extremal
// element in row-major order.

namespace detail {

struct ReducePlan {
  Shape out_shape;
  std::vector<std::size_t> out_index;  // input linear index -> output linear index
};

inline ReducePlan make_reduce_plan(const Shape& in, std::vector<int> axes) {
  const int r = static_cast<int>(in.size());
  std::vector<bool> reduced(in.size(), false);
  for (int a : axes) {
    if (a < 0) a += r;
    if (a < 0 || a >= r) throw ShapeError("reduce: invalid axis");
    reduced[static_cast<std::size_t>(a)] = true;
  }
  ReducePlan plan;
  for (std::size_t i = 0; i < in.size(); ++i)
    if (!reduced[i]) plan.out_shape.push_back(in[i]);
  // Row-major walk of the input, tracking the output index.
  const std::size_t n = shape_numel(in);
  plan.out_index.resize(n);
  std::vector<std::size_t> idx(in.size(), 0);
  std::size_t out_lin = 0;
  // Strides of the output over non-reduced axes.
  std::vector<std::size_t> out_stride(in.size(), 0);
  std::size_t s = 1;
  for (int i = r - 1; i >= 0; --i) {
    if (!reduced[static_cast<std::size_t>(i)]) {
      out_stride[static_cast<std::size_t>(i)] = s;
      s *= in[static_cast<std::size_t>(i)];
    }
  }
  for (std::size_t lin = 0; lin < n; ++lin) {
    plan.out_index[lin] = out_lin;
    // increment multi-index
    for (int i = r - 1; i >= 0; --i) {
      std::size_t ui = static_cast<std::size_t>(i);
      idx[ui]++;
      if (!reduced[ui]) out_lin += out_stride[ui];
      if (idx[ui] < in[ui]) break;
      if (!reduced[ui]) out_lin -= out_stride[ui] * in[ui];
      idx[ui] = 0;
    }
  }
  return plan;
}

}  // namespace detail

enum class ReduceKind { Sum, Mean, Max, Min };

template <class S>
TensorT<S> reduce(ReduceKind kind, const TensorT<S>& a, std::vector<int> axes) {
  if (axes.empty()) {
    axes.resize(a.rank());
    std::iota(axes.begin(), axes.end(), 0);
  }
  auto plan = detail::make_reduce_plan(a.shape(), axes);
  TensorT<S> out = TensorT<S>::zeros(plan.out_shape);
  const std::size_t n = a.size();
  const std::size_t group = out.size() == 0 ? 1 : n / out.size();
  const S* pa = a.data();
  S* po = out.data();
  std::vector<std::size_t> arg;  // first extremal input index per out element
  switch (kind) {
    case ReduceKind::Sum:
    case ReduceKind::Mean:
      for (std::size_t i = 0; i < n; ++i) po[plan.out_index[i]] += pa[i];
      if (kind == ReduceKind::Mean)
        for (std::size_t i = 0; i < out.size(); ++i) po[i] /= static_cast<S>(group);
      break;
    case ReduceKind::Max:
    case ReduceKind::Min: {
      arg.assign(out.size(), std::numeric_limits<std::size_t>::max());
      std::vector<bool> seen(out.size(), false);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t o = plan.out_index[i];
        const bool better = !seen[o] || (kind == ReduceKind::Max ? pa[i] > po[o]
                                                                 : pa[i] < po[o]);
        if (better) {
          po[o] = pa[i];
          arg[o] = i;
          seen[o] = true;
        }
      }
      break;
    }
  }
  if (detail::track(a)) {
    out.set_requires_grad(true);
    auto ad = a.store(), od = out.store();
    auto indices = std::make_shared<std::vector<std::size_t>>(std::move(plan.out_index));
    auto args = std::make_shared<std::vector<std::size_t>>(std::move(arg));
    TapeT<S>::current().record([ad, od, indices, args, kind, group] {
      if (od->grad.empty()) return;
      S* ga = detail::ensure_grad(ad).data();
      switch (kind) {
        case ReduceKind::Sum:
          for (std::size_t i = 0; i < indices->size(); ++i)
            ga[i] += od->grad[(*indices)[i]];
          break;
        case ReduceKind::Mean:
          for (std::size_t i = 0; i < indices->size(); ++i)
            ga[i] += od->grad[(*indices)[i]] / static_cast<S>(group);
          break;
        case ReduceKind::Max:
        case ReduceKind::Min:
          for (std::size_t o = 0; o < args->size(); ++o)
            ga[(*args)[o]] += od->grad[o];
          break;
      }
    });
  }
  return out;
}

template <class S> TensorT<S> sum(const TensorT<S>& a, std::vector<int> axes = {}) { return reduce(ReduceKind::Sum, a, std::move(axes)); }
template <class S> TensorT<S> mean(const TensorT<S>& a, std::vector<int> axes = {}) { return reduce(ReduceKind::Mean, a, std::move(axes)); }
template <class S> TensorT<S> reduce_max(const TensorT<S>& a, std::vector<int> axes = {}) { return reduce(ReduceKind::Max, a, std::move(axes)); }
template <class S> TensorT<S> reduce_min(const TensorT<S>& a, std::vector<int> axes = {}) { return reduce(ReduceKind::Min, a, std::move(axes)); }

// ---------------------------------------------------------------------------
// Shape ops

template <class S>
TensorT<S> reshape(const TensorT<S>& a, Shape shape) {
  require(shape_numel(shape) == a.size(), "reshape: element count mismatch");
  TensorT<S> out = TensorT<S>::from(std::move(shape), a.values());
  if (detail::track(a)) {
    out.set_requires_grad(true);
    auto ad = a.store(), od = out.store();
    TapeT<S>::current().record([ad, od] {
      if (od->grad.empty()) return;
      S* ga = detail::ensure_grad(ad).data();
      for (std::size_t i = 0; i < od->grad.size(); ++i) ga[i] += od->grad[i];
    });
  }
  return out;
}

namespace detail {
// Copies a contiguous [outer, span, inner] block structure; used by
// concat/slice/pad which all act along one axis.
template <class S>
void axis_extents(const Shape& s, int axis, std::size_t& outer, std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i)
    inner *= s[i];
}
}  // namespace detail

template <class S>
TensorT<S> concat(const std::vector<TensorT<S>>& parts, int axis) {
  require(!parts.empty(), "concat: empty input list");
  const int r = static_cast<int>(parts[0].rank());
  if (axis < 0) axis += r;
  require(axis >= 0 && axis < r, "concat: invalid axis");
  Shape out_shape = parts[0].shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(static_cast<int>(p.rank()) == r, "concat: rank mismatch");
    for (int i = 0; i < r; ++i)
      if (i != axis)
        require(p.shape()[static_cast<std::size_t>(i)] == out_shape[static_cast<std::size_t>(i)],
                "concat: shape mismatch off the concat axis");
    total += p.shape()[static_cast<std::size_t>(axis)];
  }
  out_shape[static_cast<std::size_t>(axis)] = total;
  TensorT<S> out = TensorT<S>::zeros(out_shape);
  std::size_t outer, inner;
  detail::axis_extents<S>(out_shape, axis, outer, inner);
  S* po = out.data();
  std::size_t offset = 0;
  bool any_grad = false;
  std::vector<std::size_t> part_offsets;
  for (const auto& p : parts) {
    const std::size_t span = p.shape()[static_cast<std::size_t>(axis)];
    const S* pp = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::memcpy(po + (o * total + offset) * inner, pp + o * span * inner,
                  span * inner * sizeof(S));
    }
    part_offsets.push_back(offset);
    offset += span;
    any_grad = any_grad || detail::track(p);
  }
  if (any_grad) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorStore<S>>> stores;
    for (const auto& p : parts) stores.push_back(p.store());
    auto od = out.store();
    TapeT<S>::current().record([stores, od, part_offsets, outer, inner, total, axis] {
      if (od->grad.empty()) return;
      for (std::size_t k = 0; k < stores.size(); ++k) {
        if (!stores[k]->requires_grad) continue;
        const std::size_t span = stores[k]->shape[static_cast<std::size_t>(axis)];
        S* gp = detail::ensure_grad(stores[k]).data();
        for (std::size_t o = 0; o < outer; ++o) {
          const S* go = od->grad.data() + (o * total + part_offsets[k]) * inner;
          S* dst = gp + o * span * inner;
          for (std::size_t i = 0; i < span * inner; ++i) dst[i] += go[i];
        }
      }
    });
  }
  return out;
}

template <class S>
TensorT<S> slice(const TensorT<S>& a, int axis, std::size_t start, std::size_t len) {
  const int r = static_cast<int>(a.rank());
  if (axis < 0) axis += r;
  require(axis >= 0 && axis < r, "slice: invalid axis");
  const std::size_t extent = a.shape()[static_cast<std::size_t>(axis)];
  require(start + len <= extent && len > 0, "slice: range out of bounds");
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(axis)] = len;
  TensorT<S> out = TensorT<S>::zeros(out_shape);
  std::size_t outer, inner;
  detail::axis_extents<S>(a.shape(), axis, outer, inner);
  const S* pa = a.data();
  S* po = out.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::memcpy(po + o * len * inner, pa + (o * extent + start) * inner,
                len * inner * sizeof(S));
  if (detail::track(a)) {
    out.set_requires_grad(true);
    auto ad = a.store(), od = out.store();
    TapeT<S>::current().record([ad, od, outer, inner, extent, start, len] {
      if (od->grad.empty()) return;
      S* ga = detail::ensure_grad(ad).data();
      for (std::size_t o = 0; o < outer; ++o) {
        const S* go = od->grad.data() + o * len * inner;
        S* dst = ga + (o * extent + start) * inner;
        for (std::size_t i = 0; i < len * inner; ++i) dst[i] += go[i];
      }
    });
  }
  return out;
}

template <class S>
TensorT<S> pad_zero(const TensorT<S>& a, int axis, std::size_t before, std::size_t after) {
  const int r = static_cast<int>(a.rank());
  if (axis < 0) axis += r;
  require(axis >= 0 && axis < r, "pad_zero: invalid axis");
  const std::size_t extent = a.shape()[static_cast<std::size_t>(axis)];
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(axis)] = extent + before + after;
  TensorT<S> out = TensorT<S>::zeros(out_shape);
  std::size_t outer, inner;
  detail::axis_extents<S>(a.shape(), axis, outer, inner);
  const std::size_t total = extent + before + after;
  const S* pa = a.data();
  S* po = out.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::memcpy(po + (o * total + before) * inner, pa + o * extent * inner,
                extent * inner * sizeof(S));
  if (detail::track(a)) {
    out.set_requires_grad(true);
    auto ad = a.store(), od = out.store();
    TapeT<S>::current().record([ad, od, outer, inner, extent, before, total] {
      if (od->grad.empty()) return;
      S* ga = detail::ensure_grad(ad).data();
      for (std::size_t o = 0; o < outer; ++o) {
        const S* go = od->grad.data() + (o * total + before) * inner;
        S* dst = ga + o * extent * inner;
        for (std::size_t i = 0; i < extent * inner; ++i) dst[i] += go[i];
      }
    });
  }
  return out;
}

// Stacks equal-shape tensors along a new leading axis.
template <class S>
TensorT<S> stack(const std::vector<TensorT<S>>& parts) {
  require(!parts.empty(), "stack: empty input list");
  std::vector<TensorT<S>> lifted;
  lifted.reserve(parts.size());
  for (const auto& p : parts) {
    Shape s = p.shape();
    s.insert(s.begin(), 1);
    lifted.push_back(reshape(p, s));
  }
  return concat(lifted, 0);
}

// Splits along axis 0 into per-index tensors with the leading axis dropped.
template <class S>
std::vector<TensorT<S>> unstack(const TensorT<S>& a) {
  require(a.rank() >= 1, "unstack: rank-0 input");
  std::vector<TensorT<S>> out;
  Shape inner(a.shape().begin() + 1, a.shape().end());
  for (std::size_t i = 0; i < a.shape()[0]; ++i)
    out.push_back(reshape(slice(a, 0, i, 1), inner));
  return out;
}

// ---------------------------------------------------------------------------
// Softmax over one axis, stabilized by max subtraction.

template <class S>
TensorT<S> softmax(const TensorT<S>& a, int axis) {
  const int r = static_cast<int>(a.rank());
  if (axis < 0) axis += r;
  require(axis >= 0 && axis < r, "softmax: invalid axis");
  std::size_t outer, inner;
  detail::axis_extents<S>(a.shape(), axis, outer, inner);
  const std::size_t span = a.shape()[static_cast<std::size_t>(axis)];
  TensorT<S> out = TensorT<S>::zeros(a.shape());
  const S* pa = a.data();
  S* po = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * span * inner + i;
      S m = pa[base];
      for (std::size_t k = 1; k < span; ++k) m = std::max(m, pa[base + k * inner]);
      S z = S(0);
      for (std::size_t k = 0; k < span; ++k) {
        const S e = std::exp(pa[base + k * inner] - m);
        po[base + k * inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < span; ++k) po[base + k * inner] /= z;
    }
  }
  if (detail::track(a)) {
    out.set_requires_grad(true);
    auto ad = a.store(), od = out.store();
    TapeT<S>::current().record([ad, od, outer, inner, span] {
      if (od->grad.empty()) return;
      S* ga = detail::ensure_grad(ad).data();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t base = o * span * inner + i;
          S dot = S(0);
          for (std::size_t k = 0; k < span; ++k)
            dot += od->grad[base + k * inner] * od->value[base + k * inner];
          for (std::size_t k = 0; k < span; ++k) {
            const std::size_t j = base + k * inner;
            ga[j] += od->value[j] * (od->grad[j] - dot);
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient checking (use with S = double).
//
// Returns max over elements of |analytic - numeric| / max(|analytic|,
// |numeric|, 1e-8) with numeric = central finite differences.
template <class S>
double grad_check(const std::function<TensorT<S>(TensorT<S>&)>& f, TensorT<S> x,
                  double eps = 1e-6) {
  x.set_requires_grad(true);
  x.clear_grad();
  TapeT<S>::current().clear();
  TensorT<S> y = f(x);
  require(y.size() == 1, "grad_check: f must be scalar-valued");
  if (!std::isfinite(static_cast<double>(y.item())))
    throw NumericError("grad_check: non-finite function value");
  backward(y);
  std::vector<S> analytic = x.has_grad() ? x.grad() : std::vector<S>(x.size(), S(0));

  NoGradGuard ng;
  double max_err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const S x0 = x.data()[i];
    x.data()[i] = x0 + static_cast<S>(eps);
    const double fp = static_cast<double>(f(x).item());
    x.data()[i] = x0 - static_cast<S>(eps);
    const double fm = static_cast<double>(f(x).item());
    x.data()[i] = x0;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = static_cast<double>(analytic[i]);
    const double err = std::abs(a - numeric) /
                       std::max({std::abs(a), std::abs(numeric), 1e-8});
    max_err = std::max(max_err, err);
  }
  return max_err;
}

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;
using Tape = TapeT<float>;

}  // namespace ravg
