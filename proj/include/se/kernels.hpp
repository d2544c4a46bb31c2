#pragma once

#include <cmath>

#include "se/common.hpp"

// Per-row compute kernels shared by the recording forward pass and the
// streaming engine. Every reduction runs in a fixed scalar order, so a frame
// processed in a batch and the same frame processed through a stream produce
// identical bits regardless of buffer alignment or sequence length.
namespace se::kern {

// y = x * W + b with W row-major (in x out). b may be null.
template <typename S>
void affine_row(const S* x, const S* w, const S* b, S* y, Index in, Index out) {
  if (b != nullptr) {
    for (Index j = 0; j < out; ++j) y[j] = b[j];
  } else {
    for (Index j = 0; j < out; ++j) y[j] = S(0);
  }
  for (Index k = 0; k < in; ++k) {
    const S xk = x[k];
    const S* wrow = w + k * out;
    for (Index j = 0; j < out; ++j) y[j] += xk * wrow[j];
  }
}

// One output frame of a causal 1-D convolution. `window` holds k_size input
// frames oldest-first, each c_in wide (zero frames where the signal has not
// started yet). w is (c_out, c_in, k) row-major.
template <typename S>
void conv1d_frame(const S* window, const S* w, const S* b, S* out, Index c_in, Index c_out,
                  Index k_size) {
  for (Index co = 0; co < c_out; ++co) {
    S acc = (b != nullptr) ? b[co] : S(0);
    const S* wco = w + co * c_in * k_size;
    for (Index ci = 0; ci < c_in; ++ci) {
      for (Index k = 0; k < k_size; ++k) {
        acc += wco[ci * k_size + k] * window[k * c_in + ci];
      }
    }
    out[co] = acc;
  }
}

// In-place safe softmax over n entries (x and y may alias). Entries at the
// causal-mask sentinel underflow to exactly zero after exp.
template <typename S>
void softmax_row(const S* x, Index n, S* y) {
  S m = x[0];
  for (Index i = 1; i < n; ++i) m = (x[i] > m) ? x[i] : m;
  S sum = S(0);
  for (Index i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - m);
    sum += y[i];
  }
  const S inv = S(1) / sum;
  for (Index i = 0; i < n; ++i) y[i] *= inv;
}

// Scaled dot-product attention for one query row against n key/value rows.
// keys/values are row-major with the given strides (>= d). w_buf holds the n
// attention weights on return.
template <typename S>
void attention_row(const S* q, const S* keys, Index key_stride, const S* values,
                   Index value_stride, Index n, Index d, S inv_sqrt_d, S* w_buf, S* out) {
  for (Index j = 0; j < n; ++j) {
    const S* kj = keys + j * key_stride;
    S acc = S(0);
    for (Index c = 0; c < d; ++c) acc += q[c] * kj[c];
    w_buf[j] = acc * inv_sqrt_d;
  }
  softmax_row(w_buf, n, w_buf);
  for (Index c = 0; c < d; ++c) out[c] = S(0);
  for (Index j = 0; j < n; ++j) {
    const S wj = w_buf[j];
    const S* vj = values + j * value_stride;
    for (Index c = 0; c < d; ++c) out[c] += wj * vj[c];
  }
}

// Channel-only layer norm of one frame. Population variance with eps.
template <typename S>
void layer_norm_row(const S* x, const S* gain, const S* bias, Index c, S eps, S* out, S* mean_out,
                    S* inv_std_out) {
  S mean = S(0);
  for (Index i = 0; i < c; ++i) mean += x[i];
  mean /= static_cast<S>(c);
  S var = S(0);
  for (Index i = 0; i < c; ++i) {
    const S d = x[i] - mean;
    var += d * d;
  }
  var /= static_cast<S>(c);
  const S inv_std = S(1) / std::sqrt(var + eps);
  for (Index i = 0; i < c; ++i) out[i] = (x[i] - mean) * inv_std * gain[i] + bias[i];
  if (mean_out != nullptr) *mean_out = mean;
  if (inv_std_out != nullptr) *inv_std_out = inv_std;
}

template <typename S>
void relu_row(const S* x, Index n, S* y) {
  for (Index i = 0; i < n; ++i) y[i] = (x[i] > S(0)) ? x[i] : S(0);
}

template <typename S>
void add_rows(const S* a, const S* b, Index n, S* y) {
  for (Index i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

// Fixed sinusoidal position code for one frame (ablation path only).
template <typename S>
void sinusoidal_pe_row(Index t, Index d_model, S* out) {
  for (Index i = 0; i < d_model; ++i) {
    const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
    const double rate = std::pow(10000.0, exponent);
    const double angle = static_cast<double>(t) / rate;
    out[i] = static_cast<S>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
  }
}

}  // namespace se::kern
