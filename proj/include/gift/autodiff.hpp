#pragma once

#include "gift/tensor.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace gift::ad {

// Reverse-mode tape over Tensor<S>. A Var is an index into the tape; ops
// append nodes whose backward closures scatter gradients into their parents.
// One tape per loss evaluation; tapes are not thread-safe, sessions own them.

template <typename S>
class Tape;

template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  int idx = -1;
  bool valid() const { return tape != nullptr && idx >= 0; }
};

template <typename S>
class Tape {
 public:
  struct Node {
    Tensor<S> val;
    Tensor<S> grad;
    bool requiresGrad = false;
    std::function<void()> backward;  // empty for leaves
  };

  Var<S> leaf(Tensor<S> value, bool requiresGrad) {
    Node n;
    n.val = std::move(value);
    n.requiresGrad = requiresGrad;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Var<S> constant(Tensor<S> value) { return leaf(std::move(value), false); }
  Var<S> param(Tensor<S> value) { return leaf(std::move(value), true); }

  Var<S> append(Tensor<S> value, bool requiresGrad, std::function<void()> backward) {
    Node n;
    n.val = std::move(value);
    n.requiresGrad = requiresGrad;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<S>& value(Var<S> v) const { return nodes_.at(v.idx).val; }
  const Tensor<S>& grad(Var<S> v) const { return nodes_.at(v.idx).grad; }
  Node& node(int i) { return nodes_.at(i); }
  bool requiresGrad(Var<S> v) const { return nodes_.at(v.idx).requiresGrad; }

  // Accumulates g into the gradient buffer of node i, allocating on first use.
  void accumulate(int i, const Tensor<S>& g) {
    Node& n = nodes_.at(i);
    if (!n.requiresGrad) return;
    if (n.grad.empty()) n.grad = Tensor<S>::zeros(n.val.shape());
    n.grad.asVector() += g.asVector();
  }
  Tensor<S>& gradBuffer(int i) {
    Node& n = nodes_.at(i);
    if (n.grad.empty()) n.grad = Tensor<S>::zeros(n.val.shape());
    return n.grad;
  }

  void backward(Var<S> out) {
    Node& o = nodes_.at(out.idx);
    if (o.val.numel() != 1) throw std::invalid_argument("backward: output must be scalar");
    if (!o.requiresGrad) return;
    o.grad = Tensor<S>::full(o.val.shape(), S(1));
    for (int i = out.idx; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.requiresGrad && n.backward && !n.grad.empty()) n.backward();
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

namespace detail {
template <typename S>
void checkSameTape(Var<S> a, Var<S> b) {
  if (a.tape != b.tape) throw std::invalid_argument("ops require vars on one tape");
}
}  // namespace detail

// ---- elementwise and reductions ----

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::checkSameTape(a, b);
  Tape<S>* t = a.tape;
  if (!t->value(a).sameShape(t->value(b)))
    throw std::invalid_argument("add: shape mismatch");
  Tensor<S> out = t->value(a);
  out.asVector() += t->value(b).asVector();
  bool rg = t->requiresGrad(a) || t->requiresGrad(b);
  int ai = a.idx, bi = b.idx;
  Var<S> r = t->append(std::move(out), rg, nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, bi, ri] {
    const Tensor<S>& g = t->node(ri).grad;
    t->accumulate(ai, g);
    t->accumulate(bi, g);
  };
  return r;
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  detail::checkSameTape(a, b);
  Tape<S>* t = a.tape;
  if (!t->value(a).sameShape(t->value(b)))
    throw std::invalid_argument("sub: shape mismatch");
  Tensor<S> out = t->value(a);
  out.asVector() -= t->value(b).asVector();
  bool rg = t->requiresGrad(a) || t->requiresGrad(b);
  int ai = a.idx, bi = b.idx;
  Var<S> r = t->append(std::move(out), rg, nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, bi, ri] {
    const Tensor<S>& g = t->node(ri).grad;
    t->accumulate(ai, g);
    if (t->node(bi).requiresGrad) {
      Tensor<S> ng = g;
      ng.asVector() *= S(-1);
      t->accumulate(bi, ng);
    }
  };
  return r;
}

template <typename S>
Var<S> scale(Var<S> a, S k) {
  Tape<S>* t = a.tape;
  Tensor<S> out = t->value(a);
  out.asVector() *= k;
  int ai = a.idx;
  Var<S> r = t->append(std::move(out), t->requiresGrad(a), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, ri, k] {
    Tensor<S> g = t->node(ri).grad;
    g.asVector() *= k;
    t->accumulate(ai, g);
  };
  return r;
}

template <typename S>
Var<S> square(Var<S> a) {
  Tape<S>* t = a.tape;
  Tensor<S> out = t->value(a);
  out.asVector() = out.asVector().array().square();
  int ai = a.idx;
  Var<S> r = t->append(std::move(out), t->requiresGrad(a), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, ri] {
    Tensor<S> g = t->node(ri).grad;
    g.asVector().array() *= S(2) * t->node(ai).val.asVector().array();
    t->accumulate(ai, g);
  };
  return r;
}

template <typename S>
Var<S> mean(Var<S> a) {
  Tape<S>* t = a.tape;
  const Tensor<S>& v = t->value(a);
  S m = v.asVector().mean();
  int ai = a.idx;
  S inv = S(1) / static_cast<S>(v.numel());
  Var<S> r = t->append(Tensor<S>::scalar(m), t->requiresGrad(a), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, ri, inv] {
    S g = t->node(ri).grad[0] * inv;
    Tensor<S> ga = Tensor<S>::full(t->node(ai).val.shape(), g);
    t->accumulate(ai, ga);
  };
  return r;
}

template <typename S>
Var<S> tanhOp(Var<S> a) {
  Tape<S>* t = a.tape;
  Tensor<S> out = t->value(a);
  out.asVector() = out.asVector().array().tanh();
  int ai = a.idx;
  Var<S> r = t->append(std::move(out), t->requiresGrad(a), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, ri] {
    Tensor<S> g = t->node(ri).grad;
    g.asVector().array() *= S(1) - t->node(ri).val.asVector().array().square();
    t->accumulate(ai, g);
  };
  return r;
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
  Tape<S>* t = a.tape;
  Tensor<S> out = t->value(a);
  out.asVector() = (S(1) / (S(1) + (-out.asVector().array()).exp())).matrix();
  int ai = a.idx;
  Var<S> r = t->append(std::move(out), t->requiresGrad(a), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, ri] {
    Tensor<S> g = t->node(ri).grad;
    auto y = t->node(ri).val.asVector().array();
    g.asVector().array() *= y * (S(1) - y);
    t->accumulate(ai, g);
  };
  return r;
}

// Clamp to [0,1]; gradient passes where the input lies strictly inside.
template <typename S>
Var<S> clamp01(Var<S> a) {
  Tape<S>* t = a.tape;
  Tensor<S> out = t->value(a);
  out.asVector() = out.asVector().array().max(S(0)).min(S(1));
  int ai = a.idx;
  Var<S> r = t->append(std::move(out), t->requiresGrad(a), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, ri] {
    const Tensor<S>& x = t->node(ai).val;
    Tensor<S> g = t->node(ri).grad;
    for (std::int64_t i = 0; i < g.numel(); ++i)
      if (!(x[i] > S(0) && x[i] < S(1))) g[i] = S(0);
    t->accumulate(ai, g);
  };
  return r;
}

template <typename S>
Var<S> reshape(Var<S> a, std::vector<int> shape) {
  Tape<S>* t = a.tape;
  Tensor<S> out = t->value(a).reshaped(shape);
  int ai = a.idx;
  Var<S> r = t->append(std::move(out), t->requiresGrad(a), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, ri] {
    Tensor<S> g = t->node(ri).grad.reshaped(t->node(ai).val.shape());
    t->accumulate(ai, g);
  };
  return r;
}

template <typename S>
Var<S> dot(Var<S> a, Var<S> b) {
  detail::checkSameTape(a, b);
  Tape<S>* t = a.tape;
  if (t->value(a).numel() != t->value(b).numel())
    throw std::invalid_argument("dot: size mismatch");
  S d = t->value(a).asVector().dot(t->value(b).asVector());
  bool rg = t->requiresGrad(a) || t->requiresGrad(b);
  int ai = a.idx, bi = b.idx;
  Var<S> r = t->append(Tensor<S>::scalar(d), rg, nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, bi, ri] {
    S g = t->node(ri).grad[0];
    if (t->node(ai).requiresGrad) {
      Tensor<S> ga = t->node(bi).val;
      ga.asVector() *= g;
      t->accumulate(ai, ga);
    }
    if (t->node(bi).requiresGrad) {
      Tensor<S> gb = t->node(ai).val;
      gb.asVector() *= g;
      t->accumulate(bi, gb);
    }
  };
  return r;
}

// y = v / ||v||_2
template <typename S>
Var<S> l2normalize(Var<S> a) {
  Tape<S>* t = a.tape;
  Tensor<S> out = t->value(a);
  S n = out.asVector().norm();
  if (n <= S(0)) throw std::domain_error("l2normalize: zero vector");
  out.asVector() /= n;
  int ai = a.idx;
  Var<S> r = t->append(std::move(out), t->requiresGrad(a), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, ai, ri, n] {
    const Tensor<S>& y = t->node(ri).val;
    const Tensor<S>& g = t->node(ri).grad;
    S yg = y.asVector().dot(g.asVector());
    Tensor<S> ga = g;
    ga.asVector() = (g.asVector() - yg * y.asVector()) / n;
    t->accumulate(ai, ga);
  };
  return r;
}

// ---- linear algebra layers ----

// x: vector (n), w: (m, n), b: (m) -> (m)
template <typename S>
Var<S> linear(Var<S> x, Var<S> w, Var<S> b) {
  Tape<S>* t = x.tape;
  const Tensor<S>& wv = t->value(w);
  const Tensor<S>& xv = t->value(x);
  const Tensor<S>& bv = t->value(b);
  int m = wv.dim(0), n = wv.dim(1);
  if (xv.numel() != n || bv.numel() != m)
    throw std::invalid_argument("linear: dimension mismatch");
  Tensor<S> out({m});
  out.asVector() = wv.asMatrix(m, n) * xv.asVector() + bv.asVector();
  bool rg = t->requiresGrad(x) || t->requiresGrad(w) || t->requiresGrad(b);
  int xi = x.idx, wi = w.idx, bi = b.idx;
  Var<S> r = t->append(std::move(out), rg, nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, xi, wi, bi, ri, m, n] {
    const Tensor<S>& g = t->node(ri).grad;
    if (t->node(xi).requiresGrad) {
      Tensor<S> gx(t->node(xi).val.shape());
      gx.asVector() = t->node(wi).val.asMatrix(m, n).transpose() * g.asVector();
      t->accumulate(xi, gx);
    }
    if (t->node(wi).requiresGrad) {
      Tensor<S> gw({m, n});
      gw.asMatrix(m, n) = g.asVector() * t->node(xi).val.asVector().transpose();
      t->accumulate(wi, gw);
    }
    if (t->node(bi).requiresGrad) t->accumulate(bi, g);
  };
  return r;
}

// Per-channel affine on an HWC tensor: out[h,w,c] = x[h,w,c]*s[c] + b[c]
template <typename S>
Var<S> channelAffine(Var<S> x, Var<S> s, Var<S> b) {
  Tape<S>* t = x.tape;
  const Tensor<S>& xv = t->value(x);
  int c = xv.dim(2);
  if (t->value(s).numel() != c || t->value(b).numel() != c)
    throw std::invalid_argument("channelAffine: channel mismatch");
  std::int64_t hw = xv.numel() / c;
  Tensor<S> out = xv;
  {
    auto om = out.asMatrix(static_cast<int>(hw), c);
    om.array().rowwise() *= t->value(s).asVector().transpose().array();
    om.rowwise() += t->value(b).asVector().transpose();
  }
  bool rg = t->requiresGrad(x) || t->requiresGrad(s) || t->requiresGrad(b);
  int xi = x.idx, si = s.idx, bi = b.idx;
  Var<S> r = t->append(std::move(out), rg, nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, xi, si, bi, ri, hw, c] {
    auto gm = t->node(ri).grad.asMatrix(static_cast<int>(hw), c);
    if (t->node(xi).requiresGrad) {
      Tensor<S> gx(t->node(xi).val.shape());
      gx.asMatrix(static_cast<int>(hw), c) =
          gm.array().rowwise() * t->node(si).val.asVector().transpose().array();
      t->accumulate(xi, gx);
    }
    if (t->node(si).requiresGrad) {
      Tensor<S> gs({c});
      gs.asVector() =
          (gm.array() * t->node(xi).val.asMatrix(static_cast<int>(hw), c).array())
              .colwise()
              .sum()
              .transpose();
      t->accumulate(si, gs);
    }
    if (t->node(bi).requiresGrad) {
      Tensor<S> gb({c});
      gb.asVector() = gm.colwise().sum().transpose();
      t->accumulate(bi, gb);
    }
  };
  return r;
}

namespace detail {

// im2col for HWC input, kernel (kh, kw), symmetric zero padding.
template <typename S>
Tensor<S> im2col(const Tensor<S>& x, int kh, int kw, int stride, int pad, int oh, int ow) {
  int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor<S> cols({oh * ow, kh * kw * c});
  S* out = cols.data();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      S* row = out + (static_cast<std::int64_t>(oy) * ow + ox) * kh * kw * c;
      for (int ky = 0; ky < kh; ++ky) {
        int iy = oy * stride - pad + ky;
        for (int kx = 0; kx < kw; ++kx) {
          int ix = ox * stride - pad + kx;
          S* dst = row + (ky * kw + kx) * c;
          if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
            const S* src = x.data() + (static_cast<std::int64_t>(iy) * w + ix) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] = src[ch];
          } else {
            for (int ch = 0; ch < c; ++ch) dst[ch] = S(0);
          }
        }
      }
    }
  }
  return cols;
}

template <typename S>
void col2im(const Tensor<S>& cols, int kh, int kw, int stride, int pad, int oh, int ow,
            Tensor<S>& gx) {
  int h = gx.dim(0), w = gx.dim(1), c = gx.dim(2);
  const S* in = cols.data();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const S* row = in + (static_cast<std::int64_t>(oy) * ow + ox) * kh * kw * c;
      for (int ky = 0; ky < kh; ++ky) {
        int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= w) continue;
          const S* src = row + (ky * kw + kx) * c;
          S* dst = gx.data() + (static_cast<std::int64_t>(iy) * w + ix) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

}  // namespace detail

// x: (h, w, cin); w: (kh, kw, cin, cout); b: (cout)
template <typename S>
Var<S> conv2d(Var<S> x, Var<S> w, Var<S> b, int stride, int pad) {
  Tape<S>* t = x.tape;
  const Tensor<S>& xv = t->value(x);
  const Tensor<S>& wv = t->value(w);
  if (xv.rank() != 3 || wv.rank() != 4)
    throw std::invalid_argument("conv2d: expects HWC input and khkw-cin-cout weight");
  int kh = wv.dim(0), kw = wv.dim(1), cin = wv.dim(2), cout = wv.dim(3);
  if (xv.dim(2) != cin) throw std::invalid_argument("conv2d: channel mismatch");
  if (t->value(b).numel() != cout) throw std::invalid_argument("conv2d: bias mismatch");
  int oh = (xv.dim(0) + 2 * pad - kh) / stride + 1;
  int ow = (xv.dim(1) + 2 * pad - kw) / stride + 1;
  auto cols = std::make_shared<Tensor<S>>(detail::im2col(xv, kh, kw, stride, pad, oh, ow));
  Tensor<S> out({oh, ow, cout});
  out.asMatrix(oh * ow, cout) =
      cols->asMatrix(oh * ow, kh * kw * cin) * wv.asMatrix(kh * kw * cin, cout);
  out.asMatrix(oh * ow, cout).rowwise() += t->value(b).asVector().transpose();
  bool rg = t->requiresGrad(x) || t->requiresGrad(w) || t->requiresGrad(b);
  int xi = x.idx, wi = w.idx, bi = b.idx;
  Var<S> r = t->append(std::move(out), rg, nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, xi, wi, bi, ri, cols, kh, kw, cin, cout, stride, pad, oh,
                          ow] {
    auto gm = t->node(ri).grad.asMatrix(oh * ow, cout);
    if (t->node(bi).requiresGrad) {
      Tensor<S> gb({cout});
      gb.asVector() = gm.colwise().sum().transpose();
      t->accumulate(bi, gb);
    }
    if (t->node(wi).requiresGrad) {
      Tensor<S> gw({kh, kw, cin, cout});
      gw.asMatrix(kh * kw * cin, cout) =
          cols->asMatrix(oh * ow, kh * kw * cin).transpose() * gm;
      t->accumulate(wi, gw);
    }
    if (t->node(xi).requiresGrad) {
      Tensor<S> gcols({oh * ow, kh * kw * cin});
      gcols.asMatrix(oh * ow, kh * kw * cin) =
          gm * t->node(wi).val.asMatrix(kh * kw * cin, cout).transpose();
      Tensor<S> gx = Tensor<S>::zeros(t->node(xi).val.shape());
      detail::col2im(gcols, kh, kw, stride, pad, oh, ow, gx);
      t->accumulate(xi, gx);
    }
  };
  return r;
}

// Nearest-neighbour 2x upsample of an HWC tensor.
template <typename S>
Var<S> upsample2x(Var<S> x) {
  Tape<S>* t = x.tape;
  const Tensor<S>& xv = t->value(x);
  int h = xv.dim(0), w = xv.dim(1), c = xv.dim(2);
  Tensor<S> out({2 * h, 2 * w, c});
  for (int y = 0; y < 2 * h; ++y)
    for (int xq = 0; xq < 2 * w; ++xq)
      for (int ch = 0; ch < c; ++ch) out.at(y, xq, ch) = xv.at(y / 2, xq / 2, ch);
  int xi = x.idx;
  Var<S> r = t->append(std::move(out), t->requiresGrad(x), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, xi, ri, h, w, c] {
    const Tensor<S>& g = t->node(ri).grad;
    Tensor<S> gx = Tensor<S>::zeros({h, w, c});
    for (int y = 0; y < 2 * h; ++y)
      for (int xq = 0; xq < 2 * w; ++xq)
        for (int ch = 0; ch < c; ++ch) gx.at(y / 2, xq / 2, ch) += g.at(y, xq, ch);
    t->accumulate(xi, gx);
  };
  return r;
}

namespace detail {
struct BilinearTap {
  int y0, y1, x0, x1;
  double wy, wx;  // weight of y1 / x1
};

inline BilinearTap bilinearTap(int oy, int ox, int ih, int iw, int oh, int ow) {
  auto src = [](int o, int osz, int isz) {
    double s = (o + 0.5) * static_cast<double>(isz) / osz - 0.5;
    if (s < 0) s = 0;
    if (s > isz - 1) s = isz - 1;
    return s;
  };
  double sy = src(oy, oh, ih), sx = src(ox, ow, iw);
  BilinearTap tp;
  tp.y0 = static_cast<int>(std::floor(sy));
  tp.x0 = static_cast<int>(std::floor(sx));
  tp.y1 = std::min(tp.y0 + 1, ih - 1);
  tp.x1 = std::min(tp.x0 + 1, iw - 1);
  tp.wy = sy - tp.y0;
  tp.wx = sx - tp.x0;
  return tp;
}
}  // namespace detail

// Differentiable bilinear resize of an HWC tensor to (oh, ow).
template <typename S>
Var<S> bilinearResize(Var<S> x, int oh, int ow) {
  Tape<S>* t = x.tape;
  const Tensor<S>& xv = t->value(x);
  int ih = xv.dim(0), iw = xv.dim(1), c = xv.dim(2);
  if (ih == oh && iw == ow) return x;
  Tensor<S> out({oh, ow, c});
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      auto tp = detail::bilinearTap(oy, ox, ih, iw, oh, ow);
      for (int ch = 0; ch < c; ++ch) {
        double v = (1 - tp.wy) * ((1 - tp.wx) * xv.at(tp.y0, tp.x0, ch) +
                                  tp.wx * xv.at(tp.y0, tp.x1, ch)) +
                   tp.wy * ((1 - tp.wx) * xv.at(tp.y1, tp.x0, ch) +
                            tp.wx * xv.at(tp.y1, tp.x1, ch));
        out.at(oy, ox, ch) = static_cast<S>(v);
      }
    }
  }
  int xi = x.idx;
  Var<S> r = t->append(std::move(out), t->requiresGrad(x), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, xi, ri, ih, iw, c, oh, ow] {
    const Tensor<S>& g = t->node(ri).grad;
    Tensor<S> gx = Tensor<S>::zeros({ih, iw, c});
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        auto tp = detail::bilinearTap(oy, ox, ih, iw, oh, ow);
        for (int ch = 0; ch < c; ++ch) {
          S gv = g.at(oy, ox, ch);
          gx.at(tp.y0, tp.x0, ch) += static_cast<S>((1 - tp.wy) * (1 - tp.wx)) * gv;
          gx.at(tp.y0, tp.x1, ch) += static_cast<S>((1 - tp.wy) * tp.wx) * gv;
          gx.at(tp.y1, tp.x0, ch) += static_cast<S>(tp.wy * (1 - tp.wx)) * gv;
          gx.at(tp.y1, tp.x1, ch) += static_cast<S>(tp.wy * tp.wx) * gv;
        }
      }
    }
    t->accumulate(xi, gx);
  };
  return r;
}

// HWC -> C mean pool
template <typename S>
Var<S> globalAvgPool(Var<S> x) {
  Tape<S>* t = x.tape;
  const Tensor<S>& xv = t->value(x);
  int c = xv.dim(2);
  std::int64_t hw = xv.numel() / c;
  Tensor<S> out({c});
  out.asVector() =
      xv.asMatrix(static_cast<int>(hw), c).colwise().mean().transpose();
  int xi = x.idx;
  Var<S> r = t->append(std::move(out), t->requiresGrad(x), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, xi, ri, hw, c] {
    const Tensor<S>& g = t->node(ri).grad;
    Tensor<S> gx(t->node(xi).val.shape());
    gx.asMatrix(static_cast<int>(hw), c).rowwise() =
        (g.asVector() / static_cast<S>(hw)).transpose();
    t->accumulate(xi, gx);
  };
  return r;
}

// Mean softmax cross-entropy of per-pixel logits (H, W, C) against hard labels.
template <typename S>
Var<S> softmaxCrossEntropy(Var<S> logits, const std::vector<int>& labels) {
  Tape<S>* t = logits.tape;
  const Tensor<S>& lv = t->value(logits);
  int c = lv.dim(lv.rank() - 1);
  std::int64_t n = lv.numel() / c;
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw std::invalid_argument("softmaxCrossEntropy: label count mismatch");
  auto probs = std::make_shared<Tensor<S>>(Tensor<S>({static_cast<int>(n), c}));
  auto lm = lv.asMatrix(static_cast<int>(n), c);
  S loss = S(0);
  for (std::int64_t i = 0; i < n; ++i) {
    int lab = labels[static_cast<std::size_t>(i)];
    if (lab < 0 || lab >= c) throw std::invalid_argument("softmaxCrossEntropy: label out of range");
    S mx = lm.row(static_cast<int>(i)).maxCoeff();
    S z = S(0);
    for (int k = 0; k < c; ++k) z += std::exp(lm(static_cast<int>(i), k) - mx);
    for (int k = 0; k < c; ++k)
      (*probs)[i * c + k] = std::exp(lm(static_cast<int>(i), k) - mx) / z;
    loss += std::log(z) + mx - lm(static_cast<int>(i), lab);
  }
  loss /= static_cast<S>(n);
  int li = logits.idx;
  auto labelsCopy = std::make_shared<std::vector<int>>(labels);
  Var<S> r = t->append(Tensor<S>::scalar(loss), t->requiresGrad(logits), nullptr);
  int ri = r.idx;
  t->node(ri).backward = [t, li, ri, probs, labelsCopy, n, c] {
    S g = t->node(ri).grad[0] / static_cast<S>(n);
    Tensor<S> gl(t->node(li).val.shape());
    for (std::int64_t i = 0; i < n; ++i)
      for (int k = 0; k < c; ++k)
        gl[i * c + k] =
            g * ((*probs)[i * c + k] -
                 (k == (*labelsCopy)[static_cast<std::size_t>(i)] ? S(1) : S(0)));
    t->accumulate(li, gl);
  };
  return r;
}

// Finite-difference gradient of f at x (central differences).
template <typename S, typename F>
Tensor<S> finiteDifference(F&& f, const Tensor<S>& x, S h) {
  Tensor<S> g = Tensor<S>::zeros(x.shape());
  Tensor<S> p = x;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    S orig = p[i];
    p[i] = orig + h;
    S fp = f(p);
    p[i] = orig - h;
    S fm = f(p);
    p[i] = orig;
    g[i] = (fp - fm) / (S(2) * h);
  }
  return g;
}

}  // namespace gift::ad
