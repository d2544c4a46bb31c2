#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "se/tensor.hpp"

namespace se {

template <typename S>
struct NamedParam {
  std::string name;
  Tensor<S>* tensor = nullptr;
};

template <typename S>
Index param_count(const std::vector<NamedParam<S>>& params) {
  Index total = 0;
  for (const NamedParam<S>& p : params) total += p.tensor->size();
  return total;
}

template <typename S>
struct AdamConfig {
  S lr = S(5e-5);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
};

// Moments are keyed by parameter name and allocated on first use.
template <typename S>
struct AdamState {
  AdamConfig<S> config;
  Index step = 0;
  std::map<std::string, Tensor<S>> m;
  std::map<std::string, Tensor<S>> v;
};

template <typename S>
S global_grad_norm(const std::vector<Tensor<S>>& grads) {
  double acc = 0;
  for (const Tensor<S>& g : grads) {
    for (Index i = 0; i < g.size(); ++i) {
      const double x = static_cast<double>(g.data()[i]);
      acc += x * x;
    }
  }
  return static_cast<S>(std::sqrt(acc));
}

// Scales all gradients jointly so their global L2 norm is at most max_norm.
template <typename S>
void clip_grad_norm(std::vector<Tensor<S>>& grads, S max_norm) {
  SE_CHECK(max_norm > S(0), "clip_grad_norm: max_norm must be > 0");
  const S norm = global_grad_norm(grads);
  if (norm <= max_norm) return;
  const S scale = max_norm / norm;
  for (Tensor<S>& g : grads) g.flat() *= scale;
}

// One bias-corrected Adam update over parallel parameter and gradient lists.
template <typename S>
void adam_step(AdamState<S>& state, const std::vector<NamedParam<S>>& params,
               const std::vector<Tensor<S>>& grads) {
  SE_CHECK(params.size() == grads.size(), "adam_step: ", params.size(), " params vs ",
           grads.size(), " grads");
  state.step += 1;
  const S b1 = state.config.beta1;
  const S b2 = state.config.beta2;
  const S corr1 = S(1) - static_cast<S>(std::pow(static_cast<double>(b1), state.step));
  const S corr2 = S(1) - static_cast<S>(std::pow(static_cast<double>(b2), state.step));
  const S rate = state.config.lr / corr1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedParam<S>& p = params[i];
    const Tensor<S>& g = grads[i];
    SE_CHECK(p.tensor->same_shape(g), "adam_step: gradient shape ", shape_str(g.shape()),
             " does not match parameter ", p.name, " ", shape_str(p.tensor->shape()));
    SE_CHECK(g.all_finite(), "adam_step: non-finite gradient for ", p.name);
    auto [mit, fresh] = state.m.try_emplace(p.name, Tensor<S>::zeros(g.shape()));
    auto vit = state.v.try_emplace(p.name, Tensor<S>::zeros(g.shape())).first;
    SE_CHECK(mit->second.same_shape(g), "adam_step: stale moment shape for ", p.name);
    (void)fresh;
    auto m = mit->second.flat();
    auto v = vit->second.flat();
    m = b1 * m + (S(1) - b1) * g.flat();
    v = b2 * v + (S(1) - b2) * g.flat() * g.flat();
    p.tensor->flat() -= rate * m / ((v / corr2).sqrt() + state.config.eps);
  }
}

}  // namespace se
