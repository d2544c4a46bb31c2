#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "se/kernels.hpp"
#include "se/tape.hpp"

// Differentiable primitives. Shapes are explicit: no broadcasting. Forward
// passes that feed the streaming engine run through se::kern so the recorded
// value and the streamed value share every reduction order; backward passes
// are free to use Eigen.
namespace se {

namespace detail {

template <typename S>
void check_same_shape(const Tape<S>& t, Var a, Var b, const char* op) {
  SE_CHECK(t.value(a).same_shape(t.value(b)), op, ": shape mismatch ",
           shape_str(t.value(a).shape()), " vs ", shape_str(t.value(b).shape()));
}

}  // namespace detail

template <typename S>
Var add(Tape<S>& t, Var a, Var b) {
  detail::check_same_shape(t, a, b, "add");
  Tensor<S> y(t.value(a).shape());
  kern::add_rows(t.value(a).data(), t.value(b).data(), y.size(), y.data());
  return t.emit(std::move(y), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape<S>& tp, Var out) {
                  const auto gy = tp.grad(out).flat();
                  if (tp.requires_grad(a)) tp.grad_buffer(a).flat() += gy;
                  if (tp.requires_grad(b)) tp.grad_buffer(b).flat() += gy;
                },
                "add");
}

template <typename S>
Var mul_scalar(Tape<S>& t, Var a, S c) {
  SE_CHECK(std::isfinite(static_cast<double>(c)), "mul_scalar: non-finite factor");
  Tensor<S> y(t.value(a).shape());
  y.flat() = t.value(a).flat() * c;
  return t.emit(std::move(y), t.requires_grad(a),
                [a, c](Tape<S>& tp, Var out) {
                  if (tp.requires_grad(a)) tp.grad_buffer(a).flat() += tp.grad(out).flat() * c;
                },
                "mul_scalar");
}

template <typename S>
Var hadamard(Tape<S>& t, Var a, Var b) {
  detail::check_same_shape(t, a, b, "hadamard");
  Tensor<S> y(t.value(a).shape());
  y.flat() = t.value(a).flat() * t.value(b).flat();
  return t.emit(std::move(y), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape<S>& tp, Var out) {
                  const auto gy = tp.grad(out).flat();
                  if (tp.requires_grad(a)) tp.grad_buffer(a).flat() += gy * tp.value(b).flat();
                  if (tp.requires_grad(b)) tp.grad_buffer(b).flat() += gy * tp.value(a).flat();
                },
                "hadamard");
}

template <typename S>
Var relu(Tape<S>& t, Var a) {
  Tensor<S> y(t.value(a).shape());
  kern::relu_row(t.value(a).data(), y.size(), y.data());
  return t.emit(std::move(y), t.requires_grad(a),
                [a](Tape<S>& tp, Var out) {
                  if (!tp.requires_grad(a)) return;
                  const auto x = tp.value(a).flat();
                  tp.grad_buffer(a).flat() +=
                      tp.grad(out).flat() * (x > S(0)).template cast<S>();
                },
                "relu");
}

template <typename S>
Var leaky_relu(Tape<S>& t, Var a, S alpha) {
  const auto x = t.value(a).flat();
  Tensor<S> y(t.value(a).shape());
  y.flat() = (x > S(0)).select(x, x * alpha);
  return t.emit(std::move(y), t.requires_grad(a),
                [a, alpha](Tape<S>& tp, Var out) {
                  if (!tp.requires_grad(a)) return;
                  const auto x = tp.value(a).flat();
                  tp.grad_buffer(a).flat() +=
                      tp.grad(out).flat() * (x > S(0)).select(ArrayX<S>::Ones(x.size()),
                                                              ArrayX<S>::Constant(x.size(), alpha));
                },
                "leaky_relu");
}

template <typename S>
Var sigmoid(Tape<S>& t, Var a) {
  Tensor<S> y(t.value(a).shape());
  y.flat() = S(1) / (S(1) + (-t.value(a).flat()).exp());
  return t.emit(std::move(y), t.requires_grad(a),
                [a](Tape<S>& tp, Var out) {
                  if (!tp.requires_grad(a)) return;
                  const auto yv = tp.value(out).flat();
                  tp.grad_buffer(a).flat() += tp.grad(out).flat() * yv * (S(1) - yv);
                },
                "sigmoid");
}

template <typename S>
Var log1p(Tape<S>& t, Var a) {
  SE_CHECK((t.value(a).flat() > S(-1)).all(), "log1p requires all inputs > -1");
  Tensor<S> y(t.value(a).shape());
  const S* x = t.value(a).data();
  for (Index i = 0; i < y.size(); ++i) y.data()[i] = std::log1p(x[i]);
  return t.emit(std::move(y), t.requires_grad(a),
                [a](Tape<S>& tp, Var out) {
                  if (!tp.requires_grad(a)) return;
                  tp.grad_buffer(a).flat() +=
                      tp.grad(out).flat() / (S(1) + tp.value(a).flat());
                },
                "log1p");
}

// Softmax over the last dimension, every leading dimension treated as rows.
template <typename S>
Var softmax_last_dim(Tape<S>& t, Var a) {
  const Tensor<S>& x = t.value(a);
  const Index cols = x.dim(x.rank() - 1);
  const Index rows = x.size() / cols;
  Tensor<S> y(x.shape());
  for (Index r = 0; r < rows; ++r) {
    kern::softmax_row(x.data() + r * cols, cols, y.data() + r * cols);
  }
  return t.emit(std::move(y), t.requires_grad(a),
                [a, rows, cols](Tape<S>& tp, Var out) {
                  if (!tp.requires_grad(a)) return;
                  const auto y2 = tp.value(out).mat(rows, cols);
                  const auto gy = tp.grad(out).mat(rows, cols);
                  auto gx = tp.grad_buffer(a).mat(rows, cols);
                  for (Index r = 0; r < rows; ++r) {
                    const S dot = (gy.row(r).array() * y2.row(r).array()).sum();
                    gx.row(r).array() += y2.row(r).array() * (gy.row(r).array() - dot);
                  }
                },
                "softmax_last_dim");
}

template <typename S>
Var matmul(Tape<S>& t, Var a, Var b) {
  const Tensor<S>& av = t.value(a);
  const Tensor<S>& bv = t.value(b);
  SE_CHECK(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0),
           "matmul: shape mismatch ", shape_str(av.shape()), " vs ", shape_str(bv.shape()));
  const Index m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor<S> y({m, n});
  for (Index r = 0; r < m; ++r) {
    kern::affine_row(av.data() + r * k, bv.data(), static_cast<const S*>(nullptr),
                     y.data() + r * n, k, n);
  }
  return t.emit(std::move(y), t.requires_grad(a) || t.requires_grad(b),
                [a, b](Tape<S>& tp, Var out) {
                  const auto gy = tp.grad(out).mat();
                  if (tp.requires_grad(a)) {
                    tp.grad_buffer(a).mat() += gy * tp.value(b).mat().transpose();
                  }
                  if (tp.requires_grad(b)) {
                    tp.grad_buffer(b).mat() += tp.value(a).mat().transpose() * gy;
                  }
                },
                "matmul");
}

// y = x W + bias row-wise; x is (T, in), W is (in, out), bias is (out).
template <typename S>
Var linear(Tape<S>& t, Var x, Var w, Var bias) {
  const Tensor<S>& xv = t.value(x);
  const Tensor<S>& wv = t.value(w);
  const Tensor<S>& bv = t.value(bias);
  SE_CHECK(xv.rank() == 2 && wv.rank() == 2 && xv.dim(1) == wv.dim(0),
           "linear: shape mismatch ", shape_str(xv.shape()), " vs ", shape_str(wv.shape()));
  SE_CHECK(bv.rank() == 1 && bv.dim(0) == wv.dim(1), "linear: bias shape ",
           shape_str(bv.shape()), " vs weight ", shape_str(wv.shape()));
  const Index rows = xv.dim(0), in = wv.dim(0), out_dim = wv.dim(1);
  Tensor<S> y({rows, out_dim});
  for (Index r = 0; r < rows; ++r) {
    kern::affine_row(xv.data() + r * in, wv.data(), bv.data(), y.data() + r * out_dim, in,
                     out_dim);
  }
  return t.emit(std::move(y), t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(bias),
                [x, w, bias](Tape<S>& tp, Var out) {
                  const auto gy = tp.grad(out).mat();
                  if (tp.requires_grad(x)) {
                    tp.grad_buffer(x).mat() += gy * tp.value(w).mat().transpose();
                  }
                  if (tp.requires_grad(w)) {
                    tp.grad_buffer(w).mat() += tp.value(x).mat().transpose() * gy;
                  }
                  if (tp.requires_grad(bias)) {
                    tp.grad_buffer(bias).flat() += gy.colwise().sum().transpose().array();
                  }
                },
                "linear");
}

template <typename S>
Var mean_all(Tape<S>& t, Var a) {
  const Tensor<S>& x = t.value(a);
  S acc = S(0);
  for (Index i = 0; i < x.size(); ++i) acc += x.data()[i];
  const S inv_n = S(1) / static_cast<S>(x.size());
  return t.emit(Tensor<S>::scalar(acc * inv_n), t.requires_grad(a),
                [a, inv_n](Tape<S>& tp, Var out) {
                  if (!tp.requires_grad(a)) return;
                  tp.grad_buffer(a).flat() += tp.grad(out).at(0) * inv_n;
                },
                "mean_all");
}

template <typename S>
Var sum_all(Tape<S>& t, Var a) {
  const Tensor<S>& x = t.value(a);
  S acc = S(0);
  for (Index i = 0; i < x.size(); ++i) acc += x.data()[i];
  return t.emit(Tensor<S>::scalar(acc), t.requires_grad(a),
                [a](Tape<S>& tp, Var out) {
                  if (!tp.requires_grad(a)) return;
                  tp.grad_buffer(a).flat() += tp.grad(out).at(0);
                },
                "sum_all");
}

// Mean absolute error between a and b. Subgradient at zero difference is 0.
template <typename S>
Var abs_mean(Tape<S>& t, Var a, Var b) {
  detail::check_same_shape(t, a, b, "abs_mean");
  const Tensor<S>& av = t.value(a);
  const Tensor<S>& bv = t.value(b);
  S acc = S(0);
  for (Index i = 0; i < av.size(); ++i) acc += std::abs(av.data()[i] - bv.data()[i]);
  const S inv_n = S(1) / static_cast<S>(av.size());
  return t.emit(Tensor<S>::scalar(acc * inv_n), t.requires_grad(a) || t.requires_grad(b),
                [a, b, inv_n](Tape<S>& tp, Var out) {
                  const S g = tp.grad(out).at(0) * inv_n;
                  const auto d = tp.value(a).flat() - tp.value(b).flat();
                  const ArrayX<S> s = (d > S(0)).template cast<S>() - (d < S(0)).template cast<S>();
                  if (tp.requires_grad(a)) tp.grad_buffer(a).flat() += g * s;
                  if (tp.requires_grad(b)) tp.grad_buffer(b).flat() -= g * s;
                },
                "abs_mean");
}

template <typename S>
Var squared_error_mean(Tape<S>& t, Var a, Var b) {
  detail::check_same_shape(t, a, b, "squared_error_mean");
  const Tensor<S>& av = t.value(a);
  const Tensor<S>& bv = t.value(b);
  S acc = S(0);
  for (Index i = 0; i < av.size(); ++i) {
    const S d = av.data()[i] - bv.data()[i];
    acc += d * d;
  }
  const S inv_n = S(1) / static_cast<S>(av.size());
  return t.emit(Tensor<S>::scalar(acc * inv_n), t.requires_grad(a) || t.requires_grad(b),
                [a, b, inv_n](Tape<S>& tp, Var out) {
                  const S g = S(2) * tp.grad(out).at(0) * inv_n;
                  const auto d = tp.value(a).flat() - tp.value(b).flat();
                  if (tp.requires_grad(a)) tp.grad_buffer(a).flat() += g * d;
                  if (tp.requires_grad(b)) tp.grad_buffer(b).flat() -= g * d;
                },
                "squared_error_mean");
}

// Same elements, new shape; row-major order is preserved.
template <typename S>
Var reshape(Tape<S>& t, Var a, Shape shape) {
  SE_CHECK(shape_size(shape) == t.value(a).size(), "reshape ", shape_str(t.value(a).shape()),
           " -> ", shape_str(shape), " changes element count");
  Tensor<S> y(shape);
  y.flat() = t.value(a).flat();
  return t.emit(std::move(y), t.requires_grad(a),
                [a](Tape<S>& tp, Var out) {
                  if (tp.requires_grad(a)) tp.grad_buffer(a).flat() += tp.grad(out).flat();
                },
                "reshape");
}

template <typename S>
Var slice_cols(Tape<S>& t, Var a, Index start, Index count) {
  const Tensor<S>& x = t.value(a);
  SE_CHECK(x.rank() == 2, "slice_cols requires rank 2, got ", shape_str(x.shape()));
  SE_CHECK(start >= 0 && count >= 1 && start + count <= x.dim(1), "slice_cols [", start, ", ",
           start + count, ") out of range for ", shape_str(x.shape()));
  Tensor<S> y({x.dim(0), count});
  y.mat() = x.mat().middleCols(start, count);
  return t.emit(std::move(y), t.requires_grad(a),
                [a, start, count](Tape<S>& tp, Var out) {
                  if (!tp.requires_grad(a)) return;
                  tp.grad_buffer(a).mat().middleCols(start, count) += tp.grad(out).mat();
                },
                "slice_cols");
}

template <typename S>
Var concat_cols(Tape<S>& t, const std::vector<Var>& parts) {
  SE_CHECK(!parts.empty(), "concat_cols: no inputs");
  const Index rows = t.value(parts[0]).dim(0);
  Index total = 0;
  bool rg = false;
  for (Var p : parts) {
    const Tensor<S>& v = t.value(p);
    SE_CHECK(v.rank() == 2 && v.dim(0) == rows, "concat_cols: shape mismatch ",
             shape_str(v.shape()), " vs ", shape_str(t.value(parts[0]).shape()));
    total += v.dim(1);
    rg = rg || t.requires_grad(p);
  }
  Tensor<S> y({rows, total});
  Index col = 0;
  for (Var p : parts) {
    const Index c = t.value(p).dim(1);
    y.mat().middleCols(col, c) = t.value(p).mat();
    col += c;
  }
  return t.emit(std::move(y), rg,
                [parts](Tape<S>& tp, Var out) {
                  const auto gy = tp.grad(out).mat();
                  Index col = 0;
                  for (Var p : parts) {
                    const Index c = tp.value(p).dim(1);
                    if (tp.requires_grad(p)) {
                      tp.grad_buffer(p).mat() += gy.middleCols(col, c);
                    }
                    col += c;
                  }
                },
                "concat_cols");
}

// Two equally shaped (H, W) maps stacked into a (2, H, W) image.
template <typename S>
Var stack_channels(Tape<S>& t, Var a, Var b) {
  detail::check_same_shape(t, a, b, "stack_channels");
  const Tensor<S>& av = t.value(a);
  SE_CHECK(av.rank() == 2, "stack_channels requires rank 2, got ", shape_str(av.shape()));
  const Index n = av.size();
  Tensor<S> y({2, av.dim(0), av.dim(1)});
  y.flat().segment(0, n) = av.flat();
  y.flat().segment(n, n) = t.value(b).flat();
  return t.emit(std::move(y), t.requires_grad(a) || t.requires_grad(b),
                [a, b, n](Tape<S>& tp, Var out) {
                  const auto gy = tp.grad(out).flat();
                  if (tp.requires_grad(a)) tp.grad_buffer(a).flat() += gy.segment(0, n);
                  if (tp.requires_grad(b)) tp.grad_buffer(b).flat() += gy.segment(n, n);
                },
                "stack_channels");
}

// Causal 1-D convolution over (T, C_in) with kernels (C_out, C_in, K) and a
// left zero pad of K-1 frames, so output frame t sees inputs 0..t only.
template <typename S>
Var conv1d_causal(Tape<S>& t, Var x, Var w, Var bias, Index stride = 1) {
  SE_CHECK(stride == 1, "conv1d_causal: stride must be 1 to keep frame alignment, got ", stride);
  const Tensor<S>& xv = t.value(x);
  const Tensor<S>& wv = t.value(w);
  const Tensor<S>& bv = t.value(bias);
  SE_CHECK(xv.rank() == 2 && wv.rank() == 3 && wv.dim(1) == xv.dim(1),
           "conv1d_causal: input ", shape_str(xv.shape()), " vs kernels ", shape_str(wv.shape()));
  const Index frames = xv.dim(0), c_in = xv.dim(1), c_out = wv.dim(0), k_size = wv.dim(2);
  SE_CHECK(bv.rank() == 1 && bv.dim(0) == c_out, "conv1d_causal: bias shape ",
           shape_str(bv.shape()), " vs kernels ", shape_str(wv.shape()));
  Tensor<S> y({frames, c_out});
  std::vector<S> window(static_cast<std::size_t>(k_size * c_in));
  for (Index f = 0; f < frames; ++f) {
    for (Index k = 0; k < k_size; ++k) {
      const Index src = f - (k_size - 1) + k;
      S* dst = window.data() + k * c_in;
      if (src < 0) {
        for (Index c = 0; c < c_in; ++c) dst[c] = S(0);
      } else {
        const S* row = xv.data() + src * c_in;
        for (Index c = 0; c < c_in; ++c) dst[c] = row[c];
      }
    }
    kern::conv1d_frame(window.data(), wv.data(), bv.data(), y.data() + f * c_out, c_in, c_out,
                       k_size);
  }
  return t.emit(
      std::move(y), t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(bias),
      [x, w, bias, frames, c_in, c_out, k_size](Tape<S>& tp, Var out) {
        const Tensor<S>& gy = tp.grad(out);
        const Tensor<S>& xv = tp.value(x);
        const Tensor<S>& wv = tp.value(w);
        const bool gx_on = tp.requires_grad(x);
        const bool gw_on = tp.requires_grad(w);
        const bool gb_on = tp.requires_grad(bias);
        Tensor<S>* gx = gx_on ? &tp.grad_buffer(x) : nullptr;
        Tensor<S>* gw = gw_on ? &tp.grad_buffer(w) : nullptr;
        Tensor<S>* gb = gb_on ? &tp.grad_buffer(bias) : nullptr;
        for (Index f = 0; f < frames; ++f) {
          for (Index co = 0; co < c_out; ++co) {
            const S g = gy.at(f, co);
            if (g == S(0)) continue;
            if (gb_on) gb->at(co) += g;
            for (Index k = 0; k < k_size; ++k) {
              const Index src = f - (k_size - 1) + k;
              if (src < 0) continue;
              for (Index c = 0; c < c_in; ++c) {
                if (gw_on) gw->at(co, c, k) += g * xv.at(src, c);
                if (gx_on) gx->at(src, c) += g * wv.at(co, c, k);
              }
            }
          }
        }
      },
      "conv1d_causal");
}

namespace detail {

// Patch matrix of a same-padded 2-D convolution: row p = pixel (p/W, p%W),
// columns ordered (c_in, dy, dx). Rebuilt in backward instead of saved.
template <typename S>
MatrixRM<S> im2col(const Tensor<S>& x, Index kh, Index kw) {
  const Index c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Index ph = kh / 2, pw = kw / 2;
  MatrixRM<S> patches = MatrixRM<S>::Zero(h * w, c_in * kh * kw);
  for (Index yy = 0; yy < h; ++yy) {
    for (Index xx = 0; xx < w; ++xx) {
      S* row = patches.data() + (yy * w + xx) * patches.cols();
      for (Index c = 0; c < c_in; ++c) {
        for (Index dy = 0; dy < kh; ++dy) {
          const Index iy = yy + dy - ph;
          if (iy < 0 || iy >= h) continue;
          const S* src = x.data() + (c * h + iy) * w;
          for (Index dx = 0; dx < kw; ++dx) {
            const Index ix = xx + dx - pw;
            if (ix >= 0 && ix < w) row[(c * kh + dy) * kw + dx] = src[ix];
          }
        }
      }
    }
  }
  return patches;
}

template <typename S>
void col2im_add(const MatrixRM<S>& gpatches, Index kh, Index kw, Tensor<S>& gx) {
  const Index c_in = gx.dim(0), h = gx.dim(1), w = gx.dim(2);
  const Index ph = kh / 2, pw = kw / 2;
  for (Index yy = 0; yy < h; ++yy) {
    for (Index xx = 0; xx < w; ++xx) {
      const S* row = gpatches.data() + (yy * w + xx) * gpatches.cols();
      for (Index c = 0; c < c_in; ++c) {
        for (Index dy = 0; dy < kh; ++dy) {
          const Index iy = yy + dy - ph;
          if (iy < 0 || iy >= h) continue;
          S* dst = gx.data() + (c * h + iy) * w;
          for (Index dx = 0; dx < kw; ++dx) {
            const Index ix = xx + dx - pw;
            if (ix >= 0 && ix < w) dst[ix] += row[(c * kh + dy) * kw + dx];
          }
        }
      }
    }
  }
}

}  // namespace detail

// Same-padded stride-1 2-D convolution over a (C_in, H, W) image with kernels
// (C_out, C_in, kh, kw). Runs as im2col plus one matrix product.
template <typename S>
Var conv2d_same(Tape<S>& t, Var x, Var w, Var bias) {
  const Tensor<S>& xv = t.value(x);
  const Tensor<S>& wv = t.value(w);
  const Tensor<S>& bv = t.value(bias);
  SE_CHECK(xv.rank() == 3 && wv.rank() == 4 && wv.dim(1) == xv.dim(0), "conv2d_same: input ",
           shape_str(xv.shape()), " vs kernels ", shape_str(wv.shape()));
  const Index c_out = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  const Index h = xv.dim(1), ww = xv.dim(2);
  SE_CHECK(kh % 2 == 1 && kw % 2 == 1, "conv2d_same: even kernel sizes rejected, got ",
           shape_str(wv.shape()));
  SE_CHECK(bv.rank() == 1 && bv.dim(0) == c_out, "conv2d_same: bias shape ",
           shape_str(bv.shape()), " vs kernels ", shape_str(wv.shape()));
  const MatrixRM<S> patches = detail::im2col(xv, kh, kw);
  MatrixRM<S> y2 = patches * wv.as_2d().transpose();
  y2.rowwise() += bv.flat().matrix().transpose();
  Tensor<S> y({c_out, h, ww});
  for (Index co = 0; co < c_out; ++co) {
    for (Index p = 0; p < h * ww; ++p) y.data()[co * h * ww + p] = y2(p, co);
  }
  return t.emit(
      std::move(y), t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(bias),
      [x, w, bias, c_out, kh, kw, h, ww](Tape<S>& tp, Var out) {
        const Tensor<S>& gy = tp.grad(out);
        MatrixRM<S> gy2(h * ww, c_out);
        for (Index co = 0; co < c_out; ++co) {
          for (Index p = 0; p < h * ww; ++p) gy2(p, co) = gy.data()[co * h * ww + p];
        }
        if (tp.requires_grad(bias)) {
          tp.grad_buffer(bias).flat() += gy2.colwise().sum().transpose().array();
        }
        const bool gx_on = tp.requires_grad(x);
        const bool gw_on = tp.requires_grad(w);
        if (!gx_on && !gw_on) return;
        const MatrixRM<S> patches = detail::im2col(tp.value(x), kh, kw);
        if (gw_on) tp.grad_buffer(w).as_2d() += gy2.transpose() * patches;
        if (gx_on) {
          const MatrixRM<S> gpatches = gy2 * tp.value(w).as_2d();
          detail::col2im_add(gpatches, kh, kw, tp.grad_buffer(x));
        }
      },
      "conv2d_same");
}

// Layer norm over the channel dimension of (T, C): each frame is normalized
// by its own moments, so frames never mix.
template <typename S>
Var layer_norm_channels(Tape<S>& t, Var x, Var gain, Var bias, S eps) {
  const Tensor<S>& xv = t.value(x);
  SE_CHECK(xv.rank() == 2, "layer_norm_channels requires rank 2, got ", shape_str(xv.shape()));
  const Index frames = xv.dim(0), c = xv.dim(1);
  SE_CHECK(c >= 2, "layer_norm_channels: C must be >= 2 (zero variance degenerate), got C=", c);
  const Tensor<S>& gv = t.value(gain);
  const Tensor<S>& bv = t.value(bias);
  SE_CHECK(gv.rank() == 1 && gv.dim(0) == c && bv.rank() == 1 && bv.dim(0) == c,
           "layer_norm_channels: gain ", shape_str(gv.shape()), " / bias ", shape_str(bv.shape()),
           " vs C=", c);
  Tensor<S> y({frames, c});
  std::vector<S> means(static_cast<std::size_t>(frames));
  std::vector<S> inv_stds(static_cast<std::size_t>(frames));
  for (Index f = 0; f < frames; ++f) {
    kern::layer_norm_row(xv.data() + f * c, gv.data(), bv.data(), c, eps, y.data() + f * c,
                         &means[static_cast<std::size_t>(f)],
                         &inv_stds[static_cast<std::size_t>(f)]);
  }
  return t.emit(
      std::move(y), t.requires_grad(x) || t.requires_grad(gain) || t.requires_grad(bias),
      [x, gain, bias, frames, c, means, inv_stds](Tape<S>& tp, Var out) {
        const auto xm = tp.value(x).mat(frames, c);
        const auto gm = tp.value(gain).flat();
        const auto gy = tp.grad(out).mat(frames, c);
        const bool gx_on = tp.requires_grad(x);
        const bool gg_on = tp.requires_grad(gain);
        const bool gb_on = tp.requires_grad(bias);
        for (Index f = 0; f < frames; ++f) {
          const S inv_std = inv_stds[static_cast<std::size_t>(f)];
          const ArrayX<S> xhat =
              (xm.row(f).transpose().array() - means[static_cast<std::size_t>(f)]) * inv_std;
          const ArrayX<S> gyr = gy.row(f).transpose().array();
          if (gg_on) tp.grad_buffer(gain).flat() += gyr * xhat;
          if (gb_on) tp.grad_buffer(bias).flat() += gyr;
          if (gx_on) {
            const ArrayX<S> dxhat = gyr * gm;
            const S sum1 = dxhat.sum();
            const S sum2 = (dxhat * xhat).sum();
            tp.grad_buffer(x).mat(frames, c).row(f).array() +=
                (inv_std / static_cast<S>(c)) *
                (static_cast<S>(c) * dxhat - sum1 - xhat * sum2).transpose();
          }
        }
      },
      "layer_norm_channels");
}

// Per-channel mean over the spatial dims of a (C, H, W) image.
template <typename S>
Var global_avg_pool2d(Tape<S>& t, Var x) {
  const Tensor<S>& xv = t.value(x);
  SE_CHECK(xv.rank() == 3, "global_avg_pool2d requires rank 3, got ", shape_str(xv.shape()));
  const Index c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
  Tensor<S> y({c});
  const S inv = S(1) / static_cast<S>(hw);
  for (Index ch = 0; ch < c; ++ch) {
    S acc = S(0);
    const S* src = xv.data() + ch * hw;
    for (Index p = 0; p < hw; ++p) acc += src[p];
    y.at(ch) = acc * inv;
  }
  return t.emit(std::move(y), t.requires_grad(x),
                [x, c, hw, inv](Tape<S>& tp, Var out) {
                  if (!tp.requires_grad(x)) return;
                  Tensor<S>& gx = tp.grad_buffer(x);
                  for (Index ch = 0; ch < c; ++ch) {
                    gx.flat().segment(ch * hw, hw) += tp.grad(out).at(ch) * inv;
                  }
                },
                "global_avg_pool2d");
}

}  // namespace se
