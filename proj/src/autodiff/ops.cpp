// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dlab/errors.hpp"

namespace dlab {

namespace kernels {

void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* a,
              const double* b, double* c) {
  constexpr std::size_t kBlock = 256;
  for (std::size_t j0 = 0; j0 < n; j0 += kBlock) {
    const std::size_t j1 = std::min(n, j0 + kBlock);
    for (std::size_t i = 0; i < m; ++i) {
      double* __restrict crow = c + i * n;
      const double* arow = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        const double* __restrict brow = b + p * n;
        for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
  }
}

}  // namespace kernels

namespace {

void require_same_tape(Var a, Var b, const char* where) {
  if (&a.tape() != &b.tape()) {
    throw std::logic_error(std::string(where) + ": operands on different tapes");
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* where) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(where) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

}  // namespace

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const double* bv = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape& t, NodeId self) {
    const Tensor& g = t.grad_ref(self);
    t.accumulate_grad(ia, g);
    t.accumulate_grad(ib, g);
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const double* bv = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape& t, NodeId self) {
    const Tensor& g = t.grad_ref(self);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      const double* bv = t.value(ib).ptr();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      const double* av = t.value(ia).ptr();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, factor](Tape& t, NodeId self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const NodeId ia = a.id();
  return a.tape().record(Tensor({1}, {s}), {ia}, [ia](Tape& t, NodeId self) {
    const double g = t.grad_ref(self)[0];
    for (double& v : t.grad_buffer(ia).data()) v += g;
  });
}

Var linear(Var x, Var weight, Var bias) {
  require_same_tape(x, weight, "linear");
  require_same_tape(x, bias, "linear");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  require_rank(xv, 2, "linear input");
  require_rank(wv, 2, "linear weight");
  require_rank(bv, 1, "linear bias");
  const std::size_t batch = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
  if (wv.dim(1) != in || bv.dim(0) != out) {
    throw ShapeError("linear: input " + shape_str(xv.shape()) + ", weight " +
                     shape_str(wv.shape()) + ", bias " + shape_str(bv.shape()));
  }
  std::vector<double> wt(in * out);
  kernels::transpose(out, in, wv.ptr(), wt.data());
  Tensor y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(bv.ptr(), bv.ptr() + out, y.ptr() + b * out);
  }
  kernels::gemm_acc(batch, out, in, xv.ptr(), wt.data(), y.ptr());

  const NodeId ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(
      std::move(y), {ix, iw, ib},
      [ix, iw, ib, batch, in, out](Tape& t, NodeId self) {
        const Tensor& g = t.grad_ref(self);
        if (t.requires_grad(ix)) {
          kernels::gemm_acc(batch, in, out, g.ptr(), t.value(iw).ptr(),
                            t.grad_buffer(ix).ptr());
        }
        if (t.requires_grad(iw)) {
          std::vector<double> gt(out * batch);
          kernels::transpose(batch, out, g.ptr(), gt.data());
          kernels::gemm_acc(out, in, batch, gt.data(), t.value(ix).ptr(),
                            t.grad_buffer(iw).ptr());
        }
        if (t.requires_grad(ib)) {
          Tensor& gb = t.grad_buffer(ib);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < out; ++o) gb[o] += g[b * out + o];
          }
        }
      });
}

Var conv2d(Var x, Var weight, Var bias, std::size_t padding) {
  require_same_tape(x, weight, "conv2d");
  require_same_tape(x, bias, "conv2d");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  require_rank(xv, 4, "conv2d input");
  require_rank(wv, 4, "conv2d weight");
  require_rank(bv, 1, "conv2d bias");
  const std::size_t batch = xv.dim(0), chans = xv.dim(1), h = xv.dim(2),
                    w = xv.dim(3);
  const std::size_t outc = wv.dim(0), ksize = wv.dim(2);
  if (wv.dim(1) != chans || wv.dim(3) != ksize || bv.dim(0) != outc ||
      h + 2 * padding < ksize || w + 2 * padding < ksize) {
    throw ShapeError("conv2d: input " + shape_str(xv.shape()) + ", weight " +
                     shape_str(wv.shape()) + ", bias " + shape_str(bv.shape()));
  }
  const std::size_t oh = h + 2 * padding - ksize + 1;
  const std::size_t ow = w + 2 * padding - ksize + 1;
  const std::size_t plane = oh * ow;
  const std::size_t ckk = chans * ksize * ksize;
  const std::size_t ncols = batch * plane;

  // im2col: rows indexed by (c, ky, kx), columns by (b, oy, ox).
  std::vector<double> cols(ckk * ncols, 0.0);
  for (std::size_t c = 0; c < chans; ++c) {
    for (std::size_t ky = 0; ky < ksize; ++ky) {
      for (std::size_t kx = 0; kx < ksize; ++kx) {
        double* row = cols.data() + ((c * ksize + ky) * ksize + kx) * ncols;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* src = xv.ptr() + (b * chans + c) * h * w;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                      static_cast<std::ptrdiff_t>(padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) -
                                        static_cast<std::ptrdiff_t>(padding);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              row[b * plane + oy * ow + ox] = src[iy * w + ix];
            }
          }
        }
      }
    }
  }

  std::vector<double> out_mat(outc * ncols);
  for (std::size_t o = 0; o < outc; ++o) {
    std::fill(out_mat.begin() + o * ncols, out_mat.begin() + (o + 1) * ncols, bv[o]);
  }
  kernels::gemm_acc(outc, ncols, ckk, wv.ptr(), cols.data(), out_mat.data());

  Tensor y({batch, outc, oh, ow});
  for (std::size_t o = 0; o < outc; ++o) {
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy(out_mat.begin() + o * ncols + b * plane,
                out_mat.begin() + o * ncols + (b + 1) * plane,
                y.ptr() + (b * outc + o) * plane);
    }
  }

  const NodeId ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(
      std::move(y), {ix, iw, ib},
      [ix, iw, ib, cols = std::move(cols), batch, chans, h, w, outc, ksize,
       padding, oh, ow, plane, ckk, ncols](Tape& t, NodeId self) {
        const Tensor& g = t.grad_ref(self);
        std::vector<double> gmat(outc * ncols);
        for (std::size_t o = 0; o < outc; ++o) {
          for (std::size_t b = 0; b < batch; ++b) {
            std::copy(g.ptr() + (b * outc + o) * plane,
                      g.ptr() + (b * outc + o + 1) * plane,
                      gmat.begin() + o * ncols + b * plane);
          }
        }
        if (t.requires_grad(ib)) {
          Tensor& gb = t.grad_buffer(ib);
          for (std::size_t o = 0; o < outc; ++o) {
            double s = 0.0;
            for (std::size_t j = 0; j < ncols; ++j) s += gmat[o * ncols + j];
            gb[o] += s;
          }
        }
        if (t.requires_grad(iw)) {
          std::vector<double> cols_t(ncols * ckk);
          kernels::transpose(ckk, ncols, cols.data(), cols_t.data());
          kernels::gemm_acc(outc, ckk, ncols, gmat.data(), cols_t.data(),
                            t.grad_buffer(iw).ptr());
        }
        if (t.requires_grad(ix)) {
          std::vector<double> wt(ckk * outc);
          kernels::transpose(outc, ckk, t.value(iw).ptr(), wt.data());
          std::vector<double> dcols(ckk * ncols, 0.0);
          kernels::gemm_acc(ckk, ncols, outc, wt.data(), gmat.data(), dcols.data());
          Tensor& gx = t.grad_buffer(ix);
          for (std::size_t c = 0; c < chans; ++c) {
            for (std::size_t ky = 0; ky < ksize; ++ky) {
              for (std::size_t kx = 0; kx < ksize; ++kx) {
                const double* row =
                    dcols.data() + ((c * ksize + ky) * ksize + kx) * ncols;
                for (std::size_t b = 0; b < batch; ++b) {
                  double* dst = gx.ptr() + (b * chans + c) * h * w;
                  for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                              static_cast<std::ptrdiff_t>(padding);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                      const std::ptrdiff_t ixx =
                          static_cast<std::ptrdiff_t>(ox + kx) -
                          static_cast<std::ptrdiff_t>(padding);
                      if (ixx < 0 || ixx >= static_cast<std::ptrdiff_t>(w)) continue;
                      dst[iy * w + ixx] += row[b * plane + oy * ow + ox];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

Var relu(Var x) {
  Tensor y = x.value();
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  const NodeId ix = x.id();
  return x.tape().record(std::move(y), {ix}, [ix](Tape& t, NodeId self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& xv = t.value(ix);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

Var avg_pool2d(Var x, std::size_t window) {
  const Tensor& xv = x.value();
  require_rank(xv, 4, "avg_pool2d");
  const std::size_t batch = xv.dim(0), chans = xv.dim(1), h = xv.dim(2),
                    w = xv.dim(3);
  if (window == 0 || h < window || w < window) {
    throw ShapeError("avg_pool2d: window " + std::to_string(window) +
                     " on " + shape_str(xv.shape()));
  }
  const std::size_t oh = h / window, ow = w / window;
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor y({batch, chans, oh, ow});
  for (std::size_t bc = 0; bc < batch * chans; ++bc) {
    const double* src = xv.ptr() + bc * h * w;
    double* dst = y.ptr() + bc * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double s = 0.0;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            s += src[(oy * window + dy) * w + ox * window + dx];
          }
        }
        dst[oy * ow + ox] = s * inv;
      }
    }
  }
  const NodeId ix = x.id();
  return x.tape().record(
      std::move(y), {ix},
      [ix, batch, chans, h, w, oh, ow, window, inv](Tape& t, NodeId self) {
        const Tensor& g = t.grad_ref(self);
        Tensor& gx = t.grad_buffer(ix);
        for (std::size_t bc = 0; bc < batch * chans; ++bc) {
          const double* src = g.ptr() + bc * oh * ow;
          double* dst = gx.ptr() + bc * h * w;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const double v = src[oy * ow + ox] * inv;
              for (std::size_t dy = 0; dy < window; ++dy) {
                for (std::size_t dx = 0; dx < window; ++dx) {
                  dst[(oy * window + dy) * w + ox * window + dx] += v;
                }
              }
            }
          }
        }
      });
}

Var flatten(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() < 2) throw ShapeError("flatten: need rank >= 2, got " + shape_str(xv.shape()));
  const std::size_t batch = xv.dim(0);
  Tensor y = xv.reshaped({batch, xv.size() / std::max<std::size_t>(batch, 1)});
  const NodeId ix = x.id();
  return x.tape().record(std::move(y), {ix}, [ix](Tape& t, NodeId self) {
    t.accumulate_grad(ix, t.grad_ref(self).reshaped(t.value(ix).shape()));
  });
}

Var apply_mask(Var x, const Tensor& mask) {
  require_same_shape(x.value(), mask, "apply_mask");
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  const NodeId ix = x.id();
  return x.tape().record(std::move(y), {ix}, [ix, mask](Tape& t, NodeId self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

Var log_softmax(Var logits, double tau) {
  const Tensor& xv = logits.value();
  require_rank(xv, 2, "log_softmax");
  if (!(tau > 0.0)) throw ConfigError("log_softmax: temperature must be positive");
  xv.require_finite("log_softmax logits");
  const std::size_t batch = xv.dim(0), classes = xv.dim(1);
  Tensor y({batch, classes});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = xv.ptr() + b * classes;
    double* out = y.ptr() + b * classes;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, row[c] / tau);
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += std::exp(row[c] / tau - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < classes; ++c) out[c] = row[c] / tau - lse;
  }
  const NodeId ix = logits.id();
  return logits.tape().record(
      std::move(y), {ix}, [ix, batch, classes, tau](Tape& t, NodeId self) {
        const Tensor& g = t.grad_ref(self);
        const Tensor& ls = t.value(self);
        Tensor& gx = t.grad_buffer(ix);
        for (std::size_t b = 0; b < batch; ++b) {
          double gs = 0.0;
          for (std::size_t c = 0; c < classes; ++c) gs += g[b * classes + c];
          for (std::size_t c = 0; c < classes; ++c) {
            const std::size_t i = b * classes + c;
            gx[i] += (g[i] - std::exp(ls[i]) * gs) / tau;
          }
        }
      });
}

}  // namespace dlab
