#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rclab/num/kernels.hpp"
#include "rclab/num/param_set.hpp"
#include "rclab/num/tensor.hpp"

namespace rclab::num {

// Handle to a node on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

// Reverse-mode autodiff tape. Each op appends a node holding its value and,
// when recording, a closure that pushes the node's gradient to its inputs.
// Parameters are bound by reference; the bound ParamSet must outlive the tape.
//
// Every op checks its output for non-finite values and throws NumericError
// naming the op and node index.
template <class Real>
class Tape {
 public:
  using T = BasicTensor<Real>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }

  const T& value(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.ref ? *n.ref : n.owned;
  }

  // Gradient of the last backward() target w.r.t. v; zeros if v was unreached.
  T grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.grad.empty() ? T(value(v).shape()) : n.grad;
  }

  Var constant(T v) { return push(std::move(v), false, "constant"); }

  // Binds a parameter. Repeated binds of the same entry share one node.
  Var param(const BasicParamSet<Real>& ps, std::string_view name) {
    const std::size_t idx = ps.index_of(name);
    const auto key = std::make_pair(static_cast<const void*>(&ps), idx);
    if (auto it = bound_.find(key); it != bound_.end()) return Var{it->second};
    Node n;
    n.ref = &ps.entry(idx).value;
    n.needs_grad = record_ && ps.entry(idx).trainable;
    n.op = "param";
    nodes_.push_back(std::move(n));
    bound_.emplace(key, nodes_.size() - 1);
    return Var{nodes_.size() - 1};
  }

  // Gradients for every entry of `ps`, zeros for entries not used on the tape.
  BasicParamSet<Real> gradients(const BasicParamSet<Real>& ps) const {
    BasicParamSet<Real> out = ps.zeros_like();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto it = bound_.find(std::make_pair(static_cast<const void*>(&ps), i));
      if (it == bound_.end()) continue;
      const Node& n = nodes_[it->second];
      if (!n.grad.empty()) out.assign(ps.entry(i).name, n.grad);
    }
    return out;
  }

  // x[B,in] * w[in,out] (+ b[out])
  Var dense(Var x, Var w) { return dense_impl(x, w, nullptr); }
  Var dense(Var x, Var w, Var b) { return dense_impl(x, w, &b); }

  Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    T out = value(a);
    const T& bv = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make(std::move(out), {a, b}, "add", [this, a, b](const T& g) {
      accumulate(a, g);
      accumulate(b, g);
    });
  }

  // a[B,C,...] + e[B,C] broadcast over trailing dims.
  Var add_channel(Var a, Var e) {
    const T& av = value(a);
    const T& ev = value(e);
    if (ev.rank() != 2 || av.dim(0) != ev.dim(0) || av.dim(1) != ev.dim(1)) {
      throw ShapeError("add_channel: " + shape_string(av.shape()) + " vs " + shape_string(ev.shape()));
    }
    const std::size_t rows = ev.size();
    const std::size_t inner = av.size() / rows;
    T out = av;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t s = 0; s < inner; ++s) out[r * inner + s] += ev[r];
    }
    return make(std::move(out), {a, e}, "add_channel", [this, a, e, rows, inner](const T& g) {
      accumulate(a, g);
      if (!needs(e)) return;
      T ge(value(e).shape());
      for (std::size_t r = 0; r < rows; ++r) {
        Real s = 0;
        for (std::size_t k = 0; k < inner; ++k) s += g[r * inner + k];
        ge[r] = s;
      }
      accumulate(e, ge);
    });
  }

  Var scale(Var a, Real s) {
    T out = value(a);
    for (auto& v : out.data()) v *= s;
    return make(std::move(out), {a}, "scale", [this, a, s](const T& g) {
      T ga = g;
      for (auto& v : ga.data()) v *= s;
      accumulate(a, ga);
    });
  }

  Var mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    T out = value(a);
    const T& bv = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return make(std::move(out), {a, b}, "mul", [this, a, b](const T& g) {
      if (needs(a)) {
        T ga = g;
        const T& bv = value(b);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= bv[i];
        accumulate(a, ga);
      }
      if (needs(b)) {
        T gb = g;
        const T& av = value(a);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= av[i];
        accumulate(b, gb);
      }
    });
  }

  Var silu(Var a) {
    const T& av = value(a);
    T out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / (Real{1} + std::exp(-av[i]));
    return make(std::move(out), {a}, "silu", [this, a](const T& g) {
      const T& av = value(a);
      T ga(av.shape());
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const Real s = Real{1} / (Real{1} + std::exp(-av[i]));
        ga[i] = g[i] * s * (Real{1} + av[i] * (Real{1} - s));
      }
      accumulate(a, ga);
    });
  }

  Var relu(Var a) {
    T out = value(a);
    for (auto& v : out.data()) v = v > Real{0} ? v : Real{0};
    return make(std::move(out), {a}, "relu", [this, a](const T& g) {
      const T& av = value(a);
      T ga(av.shape());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = av[i] > Real{0} ? g[i] : Real{0};
      accumulate(a, ga);
    });
  }

  // x[B,C,...] normalized over groups of C/groups channels (and trailing dims),
  // then scaled by gamma[C] and shifted by beta[C].
  Var group_norm(Var x, Var gamma, Var beta, std::size_t groups, Real eps = Real{1e-5}) {
    const T& xv = value(x);
    if (xv.rank() < 2) throw ShapeError("group_norm: input must be at least 2D");
    const std::size_t batch = xv.dim(0), channels = xv.dim(1);
    if (groups == 0 || channels % groups != 0) {
      throw ShapeError("group_norm: " + std::to_string(channels) + " channels not divisible into " +
                       std::to_string(groups) + " groups");
    }
    if (value(gamma).size() != channels || value(beta).size() != channels) {
      throw ShapeError("group_norm: affine parameters must have " + std::to_string(channels) + " entries");
    }
    const std::size_t spatial = xv.size() / (batch * channels);
    const std::size_t per_group = channels / groups;
    const std::size_t count = per_group * spatial;
    T xhat(xv.shape());
    std::vector<Real> rstd(batch * groups);
    T out(xv.shape());
    const T& gv = value(gamma);
    const T& bv = value(beta);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t off = (b * channels + g * per_group) * spatial;
        Real mean = 0;
        for (std::size_t i = 0; i < count; ++i) mean += xv[off + i];
        mean /= static_cast<Real>(count);
        Real var = 0;
        for (std::size_t i = 0; i < count; ++i) {
          const Real d = xv[off + i] - mean;
          var += d * d;
        }
        var /= static_cast<Real>(count);
        const Real r = Real{1} / std::sqrt(var + eps);
        rstd[b * groups + g] = r;
        for (std::size_t c = 0; c < per_group; ++c) {
          const std::size_t ch = g * per_group + c;
          for (std::size_t s = 0; s < spatial; ++s) {
            const std::size_t i = off + c * spatial + s;
            xhat[i] = (xv[i] - mean) * r;
            out[i] = xhat[i] * gv[ch] + bv[ch];
          }
        }
      }
    }
    return make(std::move(out), {x, gamma, beta}, "group_norm",
                [this, x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd), batch, channels,
                 groups, spatial, per_group, count](const T& g) {
                  const T& gv = value(gamma);
                  T gg(Shape{channels}), gb(Shape{channels});
                  T gx(xhat.shape());
                  for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t grp = 0; grp < groups; ++grp) {
                      const std::size_t off = (b * channels + grp * per_group) * spatial;
                      Real sum_d = 0, sum_dx = 0;
                      for (std::size_t c = 0; c < per_group; ++c) {
                        const std::size_t ch = grp * per_group + c;
                        for (std::size_t s = 0; s < spatial; ++s) {
                          const std::size_t i = off + c * spatial + s;
                          gg[ch] += g[i] * xhat[i];
                          gb[ch] += g[i];
                          const Real d = g[i] * gv[ch];
                          sum_d += d;
                          sum_dx += d * xhat[i];
                        }
                      }
                      const Real r = rstd[b * groups + grp];
                      const Real n = static_cast<Real>(count);
                      for (std::size_t c = 0; c < per_group; ++c) {
                        const std::size_t ch = grp * per_group + c;
                        for (std::size_t s = 0; s < spatial; ++s) {
                          const std::size_t i = off + c * spatial + s;
                          const Real d = g[i] * gv[ch];
                          gx[i] = r * (d - sum_d / n - xhat[i] * sum_dx / n);
                        }
                      }
                    }
                  }
                  accumulate(x, gx);
                  accumulate(gamma, gg);
                  accumulate(beta, gb);
                });
  }

  // x[B,Cin,H,W] convolved with w[Cout,Cin,K,K] (odd K, stride 1, zero padding
  // K/2 so spatial size is preserved), plus b[Cout].
  Var conv2d(Var x, Var w, Var b) {
    const T& xv = value(x);
    const T& wv = value(w);
    if (xv.rank() != 4 || wv.rank() != 4 || wv.dim(1) != xv.dim(1) || wv.dim(2) != wv.dim(3) ||
        wv.dim(2) % 2 == 0 || value(b).size() != wv.dim(0)) {
      throw ShapeError("conv2d: input " + shape_string(xv.shape()) + ", kernel " + shape_string(wv.shape()));
    }
    const Conv geo{xv.dim(0), xv.dim(1), wv.dim(0), xv.dim(2), xv.dim(3), wv.dim(2)};
    const std::size_t hw = geo.h * geo.w;
    const std::size_t patch = geo.cin * geo.k * geo.k;
    T out(Shape{geo.batch, geo.cout, geo.h, geo.w});
    std::vector<Real> cols(patch * hw);
    const T& bv = value(b);
    for (std::size_t n = 0; n < geo.batch; ++n) {
      im2col(geo, xv.ptr() + n * geo.cin * hw, cols.data());
      Real* o = out.ptr() + n * geo.cout * hw;
      kernels::gemm_nn(geo.cout, patch, hw, wv.ptr(), cols.data(), o);
      for (std::size_t c = 0; c < geo.cout; ++c) {
        for (std::size_t s = 0; s < hw; ++s) o[c * hw + s] += bv[c];
      }
    }
    return make(std::move(out), {x, w, b}, "conv2d", [this, x, w, b, geo, hw, patch](const T& g) {
      const T& xv = value(x);
      const T& wv = value(w);
      T gx(xv.shape()), gw(wv.shape()), gb(value(b).shape());
      std::vector<Real> cols(patch * hw), gcols(patch * hw), gw_n(geo.cout * patch);
      for (std::size_t n = 0; n < geo.batch; ++n) {
        const Real* go = g.ptr() + n * geo.cout * hw;
        for (std::size_t c = 0; c < geo.cout; ++c) {
          for (std::size_t s = 0; s < hw; ++s) gb[c] += go[c * hw + s];
        }
        if (needs(w)) {
          im2col(geo, xv.ptr() + n * geo.cin * hw, cols.data());
          kernels::gemm_nt(geo.cout, hw, patch, go, cols.data(), gw_n.data());
          for (std::size_t i = 0; i < gw_n.size(); ++i) gw[i] += gw_n[i];
        }
        if (needs(x)) {
          std::fill(gcols.begin(), gcols.end(), Real{0});
          kernels::gemm_tn_acc(geo.cout, patch, hw, wv.ptr(), go, gcols.data());
          col2im(geo, gcols.data(), gx.ptr() + n * geo.cin * hw);
        }
      }
      accumulate(x, gx);
      accumulate(w, gw);
      accumulate(b, gb);
    });
  }

  // Rows of table[R,E] selected by `rows` -> [rows.size(), E].
  Var embedding(Var table, std::span<const std::size_t> rows) {
    const T& tv = value(table);
    if (tv.rank() != 2) throw ShapeError("embedding: table must be 2D");
    const std::size_t width = tv.dim(1);
    T out(Shape{rows.size(), width});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= tv.dim(0)) {
        throw ArgumentError("embedding: row " + std::to_string(rows[i]) + " out of range " +
                            std::to_string(tv.dim(0)));
      }
      std::copy_n(tv.ptr() + rows[i] * width, width, out.ptr() + i * width);
    }
    return make(std::move(out), {table}, "embedding",
                [this, table, idx = std::vector<std::size_t>(rows.begin(), rows.end()), width](const T& g) {
                  T gt(value(table).shape());
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    for (std::size_t j = 0; j < width; ++j) gt[idx[i] * width + j] += g[i * width + j];
                  }
                  accumulate(table, gt);
                });
  }

  // a[B,p] ++ b[B,q] -> [B,p+q]
  Var concat(Var a, Var b) {
    const T& av = value(a);
    const T& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0)) {
      throw ShapeError("concat: " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
    }
    const std::size_t rows = av.dim(0), p = av.dim(1), q = bv.dim(1);
    T out(Shape{rows, p + q});
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(av.ptr() + r * p, p, out.ptr() + r * (p + q));
      std::copy_n(bv.ptr() + r * q, q, out.ptr() + r * (p + q) + p);
    }
    return make(std::move(out), {a, b}, "concat", [this, a, b, rows, p, q](const T& g) {
      T ga(Shape{rows, p}), gb(Shape{rows, q});
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(g.ptr() + r * (p + q), p, ga.ptr() + r * p);
        std::copy_n(g.ptr() + r * (p + q) + p, q, gb.ptr() + r * q);
      }
      accumulate(a, ga);
      accumulate(b, gb);
    });
  }

  Var reshape(Var a, Shape shape) {
    T out = value(a).reshaped(std::move(shape));
    return make(std::move(out), {a}, "reshape",
                [this, a](const T& g) { accumulate(a, g.reshaped(value(a).shape())); });
  }

  // Mean of squared differences over all elements -> [1].
  Var mse(Var a, Var b) {
    require_same_shape(a, b, "mse");
    const T& av = value(a);
    const T& bv = value(b);
    Real s = 0;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const Real d = av[i] - bv[i];
      s += d * d;
    }
    const Real n = static_cast<Real>(av.size());
    return make(T(Shape{1}, s / n), {a, b}, "mse", [this, a, b, n](const T& g) {
      const T& av = value(a);
      const T& bv = value(b);
      T ga(av.shape());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = Real{2} * (av[i] - bv[i]) / n * g[0];
      accumulate(a, ga);
      if (needs(b)) {
        for (auto& v : ga.data()) v = -v;
        accumulate(b, ga);
      }
    });
  }

  Var sum(Var a) {
    Real s = 0;
    for (Real v : value(a).data()) s += v;
    return make(T(Shape{1}, s), {a}, "sum", [this, a](const T& g) { accumulate(a, T(value(a).shape(), g[0])); });
  }

  // Mean softmax cross-entropy of logits[B,K] against integer labels -> [1].
  Var cross_entropy(Var logits, std::span<const std::size_t> labels) {
    const T& lv = value(logits);
    if (lv.rank() != 2 || lv.dim(0) != labels.size()) throw ShapeError("cross_entropy: label count mismatch");
    const std::size_t rows = lv.dim(0), k = lv.dim(1);
    T prob(lv.shape());
    Real loss = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      const Real* l = lv.ptr() + r * k;
      Real mx = l[0];
      for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, l[j]);
      Real z = 0;
      for (std::size_t j = 0; j < k; ++j) z += std::exp(l[j] - mx);
      for (std::size_t j = 0; j < k; ++j) prob[r * k + j] = std::exp(l[j] - mx) / z;
      loss += -(l[labels[r]] - mx - std::log(z));
    }
    return make(T(Shape{1}, loss / static_cast<Real>(rows)), {logits}, "cross_entropy",
                [this, logits, prob = std::move(prob), lab = std::vector<std::size_t>(labels.begin(), labels.end()),
                 rows, k](const T& g) {
                  T gl = prob;
                  for (std::size_t r = 0; r < rows; ++r) gl[r * k + lab[r]] -= Real{1};
                  const Real s = g[0] / static_cast<Real>(rows);
                  for (auto& v : gl.data()) v *= s;
                  accumulate(logits, gl);
                });
  }

  // Seeds d(target)/d(target) = 1 and propagates to every reachable node.
  void backward(Var target) {
    if (!record_) throw ArgumentError("backward on a non-recording tape");
    if (value(target).size() != 1) throw ShapeError("backward target must be a scalar");
    for (auto& n : nodes_) n.grad = T();
    nodes_[target.id].grad = T(Shape{1}, Real{1});
    for (std::size_t i = target.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(n.grad);
    }
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    T owned;
    const T* ref = nullptr;
    T grad;
    std::function<void(const T&)> backward;
    bool needs_grad = false;
    const char* op = "";
  };

  struct Conv {
    std::size_t batch, cin, cout, h, w, k;
  };

  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  void accumulate(Var v, const T& g) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (n.grad.empty()) {
      n.grad = g;
      return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
  }

  Var push(T value, bool needs_grad, const char* op) {
    if (!value.all_finite()) {
      throw NumericError(std::string("non-finite value produced by ") + op,
                         std::string(op) + "#" + std::to_string(nodes_.size()));
    }
    Node n;
    n.owned = std::move(value);
    n.needs_grad = needs_grad;
    n.op = op;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  template <class Fn>
  Var make(T value, std::initializer_list<Var> inputs, const char* op, Fn&& fn) {
    bool any = false;
    for (Var v : inputs) any = any || needs(v);
    const bool track = record_ && any;
    Var out = push(std::move(value), track, op);
    if (track) nodes_[out.id].backward = std::forward<Fn>(fn);
    return out;
  }

  void require_same_shape(Var a, Var b, const char* op) const {
    if (value(a).shape() != value(b).shape()) {
      throw ShapeError(std::string(op) + ": shape " + shape_string(value(a).shape()) + " vs " +
                       shape_string(value(b).shape()));
    }
  }

  Var dense_impl(Var x, Var w, const Var* bias) {
    const T& xv = value(x);
    const T& wv = value(w);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0)) {
      throw ShapeError("dense: input " + shape_string(xv.shape()) + ", weight " + shape_string(wv.shape()));
    }
    const std::size_t m = xv.dim(0), k = xv.dim(1), n = wv.dim(1);
    T out(Shape{m, n});
    kernels::gemm_nn(m, k, n, xv.ptr(), wv.ptr(), out.ptr());
    Var b{};
    if (bias) {
      b = *bias;
      const T& bv = value(b);
      if (bv.size() != n) throw ShapeError("dense: bias size " + std::to_string(bv.size()));
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
      }
    }
    const bool has_bias = bias != nullptr;
    auto fn = [this, x, w, b, has_bias, m, k, n](const T& g) {
      if (needs(x)) {
        T gx(Shape{m, k});
        kernels::gemm_nt(m, n, k, g.ptr(), value(w).ptr(), gx.ptr());
        accumulate(x, gx);
      }
      if (needs(w)) {
        T gw(Shape{k, n});
        kernels::gemm_tn_acc(m, k, n, value(x).ptr(), g.ptr(), gw.ptr());
        accumulate(w, gw);
      }
      if (has_bias && needs(b)) {
        T gb(Shape{n});
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
        }
        accumulate(b, gb);
      }
    };
    if (has_bias) return make(std::move(out), {x, w, b}, "dense", std::move(fn));
    return make(std::move(out), {x, w}, "dense", std::move(fn));
  }

  static void im2col(const Conv& g, const Real* x, Real* cols) {
    const std::size_t hw = g.h * g.w;
    const long pad = static_cast<long>(g.k / 2);
    for (std::size_t c = 0; c < g.cin; ++c) {
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          Real* row = cols + ((c * g.k + ky) * g.k + kx) * hw;
          for (std::size_t y = 0; y < g.h; ++y) {
            const long sy = static_cast<long>(y + ky) - pad;
            for (std::size_t xx = 0; xx < g.w; ++xx) {
              const long sx = static_cast<long>(xx + kx) - pad;
              const bool inside = sy >= 0 && sy < static_cast<long>(g.h) && sx >= 0 && sx < static_cast<long>(g.w);
              row[y * g.w + xx] = inside ? x[c * hw + static_cast<std::size_t>(sy) * g.w + static_cast<std::size_t>(sx)]
                                         : Real{0};
            }
          }
        }
      }
    }
  }

  static void col2im(const Conv& g, const Real* cols, Real* x) {
    const std::size_t hw = g.h * g.w;
    const long pad = static_cast<long>(g.k / 2);
    for (std::size_t c = 0; c < g.cin; ++c) {
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const Real* row = cols + ((c * g.k + ky) * g.k + kx) * hw;
          for (std::size_t y = 0; y < g.h; ++y) {
            const long sy = static_cast<long>(y + ky) - pad;
            if (sy < 0 || sy >= static_cast<long>(g.h)) continue;
            for (std::size_t xx = 0; xx < g.w; ++xx) {
              const long sx = static_cast<long>(xx + kx) - pad;
              if (sx < 0 || sx >= static_cast<long>(g.w)) continue;
              x[c * hw + static_cast<std::size_t>(sy) * g.w + static_cast<std::size_t>(sx)] += row[y * g.w + xx];
            }
          }
        }
      }
    }
  }

  bool record_;
  std::deque<Node> nodes_;  // stable references across push_back
  std::map<std::pair<const void*, std::size_t>, std::size_t> bound_;
};

}  // namespace rclab::num
