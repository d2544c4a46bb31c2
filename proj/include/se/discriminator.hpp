#pragma once

#include <utility>
#include <vector>

#include "se/adam.hpp"
#include "se/spectral_norm.hpp"

namespace se {

inline constexpr double kLeakySlope = 0.3;
// Power-iteration warm-up budget at init. 20 iterations is the floor for a
// 2%-accurate sigma estimate, but a matrix whose top two singular values are
// close converges slowly, so init spends a comfortably larger budget (the
// cost is microseconds per weight).
inline constexpr int kSpectralWarmupIters = 100;

// The architecture is fixed: four spectrally normalized convs over the
// 2-channel (enhanced, clean) image, global average pooling, then
// 50 -> 50 -> 10 -> 1 fully connected.
struct DiscConvSpec {
  Index filters;
  Index kernel;
};

inline const std::vector<DiscConvSpec>& disc_conv_specs() {
  static const std::vector<DiscConvSpec> specs = {{15, 5}, {25, 7}, {40, 9}, {50, 11}};
  return specs;
}

template <typename S>
struct DiscriminatorWeights {
  std::vector<Tensor<S>> conv_w;
  std::vector<Tensor<S>> conv_b;
  Tensor<S> fc1_w, fc1_b, fc2_w, fc2_b, fc3_w, fc3_b;
  std::vector<SpectralNormState<S>> conv_sn;
  SpectralNormState<S> fc1_sn, fc2_sn, fc3_sn;

  static DiscriminatorWeights init(Rng& rng) {
    DiscriminatorWeights w;
    Index c_in = 2;
    for (const DiscConvSpec& spec : disc_conv_specs()) {
      const Index fan_in = c_in * spec.kernel * spec.kernel;
      w.conv_w.push_back(
          fan_in_uniform<S>({spec.filters, c_in, spec.kernel, spec.kernel}, fan_in, rng));
      w.conv_b.push_back(Tensor<S>::zeros({spec.filters}));
      SpectralNormState<S> st;
      st.init(spec.filters, fan_in, rng);
      w.conv_sn.push_back(std::move(st));
      c_in = spec.filters;
    }
    w.fc1_w = fan_in_uniform<S>({50, 50}, 50, rng);
    w.fc1_b = Tensor<S>::zeros({50});
    w.fc1_sn.init(50, 50, rng);
    w.fc2_w = fan_in_uniform<S>({50, 10}, 50, rng);
    w.fc2_b = Tensor<S>::zeros({10});
    w.fc2_sn.init(50, 10, rng);
    w.fc3_w = fan_in_uniform<S>({10, 1}, 10, rng);
    w.fc3_b = Tensor<S>::zeros({1});
    w.fc3_sn.init(10, 1, rng);
    w.warm_up_all(kSpectralWarmupIters);
    return w;
  }

  std::vector<NamedParam<S>> named_params() {
    std::vector<NamedParam<S>> p;
    for (std::size_t i = 0; i < conv_w.size(); ++i) {
      p.push_back({str_cat("conv", i, ".w"), &conv_w[i]});
      p.push_back({str_cat("conv", i, ".b"), &conv_b[i]});
    }
    p.push_back({"fc1.w", &fc1_w});
    p.push_back({"fc1.b", &fc1_b});
    p.push_back({"fc2.w", &fc2_w});
    p.push_back({"fc2.b", &fc2_b});
    p.push_back({"fc3.w", &fc3_w});
    p.push_back({"fc3.b", &fc3_b});
    return p;
  }

  // One power iteration per normalized weight; call once per training step.
  void power_iterate_all() {
    for (std::size_t i = 0; i < conv_w.size(); ++i) power_iterate(conv_sn[i], conv_w[i]);
    power_iterate(fc1_sn, fc1_w);
    power_iterate(fc2_sn, fc2_w);
    power_iterate(fc3_sn, fc3_w);
  }

  void warm_up_all(int iters) {
    for (int i = 0; i < iters; ++i) power_iterate_all();
  }
};

template <typename S>
Index disc_param_count(DiscriminatorWeights<S>& w) {
  return param_count(w.named_params());
}

struct DiscVars {
  std::vector<Var> conv_w;
  std::vector<Var> conv_b;
  Var fc1_w, fc1_b, fc2_w, fc2_b, fc3_w, fc3_b;
};

template <typename S>
DiscVars stage_discriminator(Tape<S>& t, const DiscriminatorWeights<S>& w, bool requires_grad) {
  DiscVars dv;
  for (std::size_t i = 0; i < w.conv_w.size(); ++i) {
    dv.conv_w.push_back(t.leaf(w.conv_w[i], requires_grad));
    dv.conv_b.push_back(t.leaf(w.conv_b[i], requires_grad));
  }
  dv.fc1_w = t.leaf(w.fc1_w, requires_grad);
  dv.fc1_b = t.leaf(w.fc1_b, requires_grad);
  dv.fc2_w = t.leaf(w.fc2_w, requires_grad);
  dv.fc2_b = t.leaf(w.fc2_b, requires_grad);
  dv.fc3_w = t.leaf(w.fc3_w, requires_grad);
  dv.fc3_b = t.leaf(w.fc3_b, requires_grad);
  return dv;
}

inline std::vector<Var> discriminator_var_list(const DiscVars& dv) {
  std::vector<Var> vars;
  for (std::size_t i = 0; i < dv.conv_w.size(); ++i) {
    vars.push_back(dv.conv_w[i]);
    vars.push_back(dv.conv_b[i]);
  }
  for (Var v : {dv.fc1_w, dv.fc1_b, dv.fc2_w, dv.fc2_b, dv.fc3_w, dv.fc3_b}) vars.push_back(v);
  return vars;
}

// Score for an (enhanced, clean) pair of compressed magnitudes, any T.
// Pooling absorbs the variable length; the output is an unbounded real.
template <typename S>
Var disc_forward(Tape<S>& t, Var enhanced, Var clean, const DiscVars& dv,
                 const DiscriminatorWeights<S>& w) {
  detail::check_same_shape(t, enhanced, clean, "disc_forward");
  SE_CHECK(t.value(enhanced).rank() == 2, "disc_forward takes (T, F) magnitudes, got ",
           shape_str(t.value(enhanced).shape()));
  const S slope = static_cast<S>(kLeakySlope);
  Var x = stack_channels(t, enhanced, clean);
  for (std::size_t i = 0; i < dv.conv_w.size(); ++i) {
    const Var wn = spectral_normalize(t, dv.conv_w[i], w.conv_sn[i]);
    x = leaky_relu(t, conv2d_same(t, x, wn, dv.conv_b[i]), slope);
  }
  Var h = reshape(t, global_avg_pool2d(t, x), {1, 50});
  h = leaky_relu(t, linear(t, h, spectral_normalize(t, dv.fc1_w, w.fc1_sn), dv.fc1_b), slope);
  h = leaky_relu(t, linear(t, h, spectral_normalize(t, dv.fc2_w, w.fc2_sn), dv.fc2_b), slope);
  h = linear(t, h, spectral_normalize(t, dv.fc3_w, w.fc3_sn), dv.fc3_b);
  return reshape(t, h, {1});
}

// Score without gradients, for logging and tests.
template <typename S>
S disc_score(const DiscriminatorWeights<S>& w, const Tensor<S>& enhanced,
             const Tensor<S>& clean) {
  Tape<S> tape;
  const Var e = tape.constant(enhanced);
  const Var c = tape.constant(clean);
  const DiscVars dv = stage_discriminator(tape, w, false);
  return tape.value(disc_forward(tape, e, c, dv, w)).at(0);
}

}  // namespace se
