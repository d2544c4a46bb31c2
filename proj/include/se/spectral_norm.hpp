#pragma once

#include <cmath>
#include <utility>

#include "se/ops.hpp"

namespace se {

// Power-iteration state for one weight. The weight is viewed as a 2-D matrix
// (dim 0 by everything else); u and v estimate its top singular pair and
// persist across steps, one iteration per training step.
template <typename S>
struct SpectralNormState {
  VectorX<S> u;
  VectorX<S> v;

  void init(Index rows, Index cols, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    u.resize(rows);
    v.resize(cols);
    for (Index i = 0; i < rows; ++i) u[i] = static_cast<S>(dist(rng));
    const S n = u.norm();
    SE_CHECK(n > S(0), "spectral norm init drew a zero vector");
    u /= n;
    v.setZero();
  }
};

template <typename S>
bool is_zero_weight(const Tensor<S>& w) {
  return (w.flat() == S(0)).all();
}

// One power iteration: v <- normalize(W^T u), u <- normalize(W v).
template <typename S>
void power_iterate(SpectralNormState<S>& state, const Tensor<S>& w) {
  const auto m = w.as_2d();
  SE_CHECK(state.u.size() == m.rows() && state.v.size() == m.cols(),
           "spectral norm state sized ", state.u.size(), "x", state.v.size(),
           " does not match weight view ", m.rows(), "x", m.cols());
  if (is_zero_weight(w)) {
    log_warn("spectral norm: zero weight matrix, skipping power iteration");
    return;
  }
  state.v = m.transpose() * state.u;
  state.v /= state.v.norm();
  state.u = m * state.v;
  state.u /= state.u.norm();
}

// sigma estimate u^T W v with the current vectors; nonnegative right after
// power_iterate (it equals ||W v|| then).
template <typename S>
S sigma_estimate(const SpectralNormState<S>& state, const Tensor<S>& w) {
  return state.u.dot(w.as_2d() * state.v);
}

template <typename S>
void warm_up(SpectralNormState<S>& state, const Tensor<S>& w, int iterations) {
  for (int i = 0; i < iterations; ++i) power_iterate(state, w);
}

// Tape op: y = W / sigma_hat with sigma_hat = u^T W v for the state's current
// vectors (held fixed by the backward pass, as in standard spectral norm).
// A zero weight has no defined sigma; the op warns and passes W through.
template <typename S>
Var spectral_normalize(Tape<S>& t, Var w, const SpectralNormState<S>& state) {
  const Tensor<S>& wv = t.value(w);
  const S sigma = sigma_estimate(state, wv);
  if (is_zero_weight(wv) || !(sigma > S(1e-20))) {
    if (is_zero_weight(wv)) {
      log_warn("spectral norm: zero weight matrix, normalization skipped");
    } else {
      log_warn("spectral norm: sigma estimate ", sigma, " too small, normalization skipped");
    }
    Tensor<S> y = wv;
    return t.emit(std::move(y), t.requires_grad(w),
                  [w](Tape<S>& tp, Var out) {
                    if (tp.requires_grad(w)) tp.grad_buffer(w).flat() += tp.grad(out).flat();
                  },
                  "spectral_normalize");
  }
  Tensor<S> y(wv.shape());
  y.flat() = wv.flat() / sigma;
  const VectorX<S> u = state.u;
  const VectorX<S> v = state.v;
  return t.emit(std::move(y), t.requires_grad(w),
                [w, u, v, sigma](Tape<S>& tp, Var out) {
                  if (!tp.requires_grad(w)) return;
                  // d(W/sigma)/dW with sigma = u^T W v:
                  //   dW = G/sigma - (sum(G .* Wbar)/sigma) * u v^T
                  const auto g = tp.grad(out).flat();
                  const auto wbar = tp.value(out).flat();
                  const S coupled = (g * wbar).sum() / sigma;
                  Tensor<S>& gw = tp.grad_buffer(w);
                  gw.flat() += g / sigma;
                  gw.as_2d() -= coupled * (u * v.transpose());
                },
                "spectral_normalize");
}

}  // namespace se
