#pragma once

#include <string>
#include <utility>
#include <vector>

#include "se/adam.hpp"
#include "se/ops.hpp"

namespace se {

// Finite stand-in for -inf in masked logits: large enough that exp underflows
// to exactly 0 in float and double, small enough to stay NaN-free in softmax.
inline constexpr double kMaskSentinel = -1e9;

struct ConvSpec {
  Index out_channels = 0;
  Index kernel_size = 0;
  Index stride = 1;
};

enum class HeadMode { kMask, kMap };

inline const char* head_mode_name(HeadMode m) { return m == HeadMode::kMask ? "mask" : "map"; }

inline HeadMode parse_head_mode(const std::string& s) {
  if (s == "mask") return HeadMode::kMask;
  if (s == "map") return HeadMode::kMap;
  fail("unknown head mode '", s, "' (expected mask or map)");
}

struct GeneratorConfig {
  Index n_blocks = 4;
  Index d_model = 512;
  Index n_heads = 8;
  Index d_k = 64;
  Index d_ff = 1024;
  std::vector<ConvSpec> conv_frontend = {{512, 3, 1}, {512, 3, 1}};
  Index n_bins = 257;
  HeadMode head_mode = HeadMode::kMask;
  bool sinusoidal_pe = false;  // ablation only
  double ln_eps = 1e-5;

  void validate() const {
    SE_CHECK(n_blocks >= 1, "n_blocks must be >= 1, got ", n_blocks);
    SE_CHECK(n_heads >= 1 && d_k >= 1 && n_heads * d_k == d_model,
             "heads * d_k must equal d_model, got ", n_heads, " * ", d_k, " vs ", d_model);
    SE_CHECK(d_ff >= 1, "d_ff must be >= 1, got ", d_ff);
    SE_CHECK(n_bins >= 2, "n_bins must be >= 2, got ", n_bins);
    SE_CHECK(!conv_frontend.empty(), "conv front-end must have at least one layer");
    for (const ConvSpec& c : conv_frontend) {
      SE_CHECK(c.stride == 1, "conv front-end stride must be 1, got ", c.stride);
      SE_CHECK(c.kernel_size >= 1, "conv kernel size must be >= 1, got ", c.kernel_size);
      SE_CHECK(c.out_channels >= 1, "conv out channels must be >= 1, got ", c.out_channels);
    }
    SE_CHECK(conv_frontend.back().out_channels == d_model,
             "last conv front-end layer must emit d_model=", d_model, " channels, got ",
             conv_frontend.back().out_channels);
    SE_CHECK(ln_eps > 0, "ln_eps must be > 0");
  }
};

// Small everything: runs the full pipeline in seconds on one core.
inline GeneratorConfig toy_generator_config() {
  GeneratorConfig c;
  c.n_blocks = 2;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_k = 8;
  c.d_ff = 32;
  c.conv_frontend = {{16, 3, 1}, {16, 3, 1}};
  c.n_bins = 33;
  return c;
}

template <typename S>
struct BlockWeights {
  Tensor<S> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor<S> ff1_w, ff1_b, ff2_w, ff2_b;
  Tensor<S> ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

template <typename S>
struct GeneratorWeights {
  std::vector<Tensor<S>> conv_w;
  std::vector<Tensor<S>> conv_b;
  std::vector<BlockWeights<S>> blocks;
  Tensor<S> head_w, head_b;

  // Biases start at zero, layer-norm gains at one, everything else fan-in
  // scaled uniform. Draw order matches named_params order.
  static GeneratorWeights init(const GeneratorConfig& cfg, Rng& rng) {
    cfg.validate();
    GeneratorWeights w;
    Index c_in = cfg.n_bins;
    for (const ConvSpec& c : cfg.conv_frontend) {
      w.conv_w.push_back(
          fan_in_uniform<S>({c.out_channels, c_in, c.kernel_size}, c_in * c.kernel_size, rng));
      w.conv_b.push_back(Tensor<S>::zeros({c.out_channels}));
      c_in = c.out_channels;
    }
    const Index d = cfg.d_model;
    for (Index i = 0; i < cfg.n_blocks; ++i) {
      BlockWeights<S> b;
      b.wq = fan_in_uniform<S>({d, d}, d, rng);
      b.bq = Tensor<S>::zeros({d});
      b.wk = fan_in_uniform<S>({d, d}, d, rng);
      b.bk = Tensor<S>::zeros({d});
      b.wv = fan_in_uniform<S>({d, d}, d, rng);
      b.bv = Tensor<S>::zeros({d});
      b.wo = fan_in_uniform<S>({d, d}, d, rng);
      b.bo = Tensor<S>::zeros({d});
      b.ff1_w = fan_in_uniform<S>({d, cfg.d_ff}, d, rng);
      b.ff1_b = Tensor<S>::zeros({cfg.d_ff});
      b.ff2_w = fan_in_uniform<S>({cfg.d_ff, d}, cfg.d_ff, rng);
      b.ff2_b = Tensor<S>::zeros({d});
      b.ln1_gain = Tensor<S>::full({d}, S(1));
      b.ln1_bias = Tensor<S>::zeros({d});
      b.ln2_gain = Tensor<S>::full({d}, S(1));
      b.ln2_bias = Tensor<S>::zeros({d});
      w.blocks.push_back(std::move(b));
    }
    w.head_w = fan_in_uniform<S>({d, cfg.n_bins}, d, rng);
    w.head_b = Tensor<S>::zeros({cfg.n_bins});
    return w;
  }

  std::vector<NamedParam<S>> named_params() {
    std::vector<NamedParam<S>> p;
    for (std::size_t i = 0; i < conv_w.size(); ++i) {
      p.push_back({str_cat("frontend", i, ".w"), &conv_w[i]});
      p.push_back({str_cat("frontend", i, ".b"), &conv_b[i]});
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      BlockWeights<S>& b = blocks[i];
      const std::string prefix = str_cat("block", i, ".");
      p.push_back({prefix + "wq", &b.wq});
      p.push_back({prefix + "bq", &b.bq});
      p.push_back({prefix + "wk", &b.wk});
      p.push_back({prefix + "bk", &b.bk});
      p.push_back({prefix + "wv", &b.wv});
      p.push_back({prefix + "bv", &b.bv});
      p.push_back({prefix + "wo", &b.wo});
      p.push_back({prefix + "bo", &b.bo});
      p.push_back({prefix + "ff1_w", &b.ff1_w});
      p.push_back({prefix + "ff1_b", &b.ff1_b});
      p.push_back({prefix + "ff2_w", &b.ff2_w});
      p.push_back({prefix + "ff2_b", &b.ff2_b});
      p.push_back({prefix + "ln1_gain", &b.ln1_gain});
      p.push_back({prefix + "ln1_bias", &b.ln1_bias});
      p.push_back({prefix + "ln2_gain", &b.ln2_gain});
      p.push_back({prefix + "ln2_bias", &b.ln2_bias});
    }
    p.push_back({"head.w", &head_w});
    p.push_back({"head.b", &head_b});
    return p;
  }
};

// Exact trainable-scalar count for a config, additive over layers.
inline Index count_params(const GeneratorConfig& cfg) {
  cfg.validate();
  Index total = 0;
  Index c_in = cfg.n_bins;
  for (const ConvSpec& c : cfg.conv_frontend) {
    total += c.out_channels * c_in * c.kernel_size + c.out_channels;
    c_in = c.out_channels;
  }
  const Index d = cfg.d_model;
  const Index per_block = 4 * (d * d + d)            // Q/K/V/output projections
                          + d * cfg.d_ff + cfg.d_ff  // feed-forward in
                          + cfg.d_ff * d + d         // feed-forward out
                          + 4 * d;                   // two layer norms
  total += cfg.n_blocks * per_block;
  total += d * cfg.n_bins + cfg.n_bins;
  return total;
}

// FNV-1a over the raw bytes of every parameter, in list order.
template <typename S>
std::uint64_t params_fingerprint(const std::vector<NamedParam<S>>& params) {
  std::uint64_t h = 1469598103934665603ull;
  for (const NamedParam<S>& p : params) {
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(p.tensor->data());
    const std::size_t n = static_cast<std::size_t>(p.tensor->size()) * sizeof(S);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

// T x T matrix, 0 on and below the diagonal, sentinel strictly above.
template <typename S>
struct CausalMask {
  Index t = 0;
  Tensor<S> m;
};

template <typename S>
CausalMask<S> build_causal_mask(Index t) {
  SE_CHECK(t >= 1, "causal mask needs T >= 1, got ", t);
  CausalMask<S> mask{t, Tensor<S>({t, t})};
  for (Index i = 0; i < t; ++i) {
    for (Index j = i + 1; j < t; ++j) mask.m.at(i, j) = static_cast<S>(kMaskSentinel);
  }
  return mask;
}

template <typename S>
void check_causal_mask(const CausalMask<S>& mask) {
  SE_CHECK(mask.t >= 1 && mask.m.rank() == 2 && mask.m.dim(0) == mask.t &&
               mask.m.dim(1) == mask.t,
           "causal mask tensor ", shape_str(mask.m.shape()), " does not match T=", mask.t);
  for (Index i = 0; i < mask.t; ++i) {
    for (Index j = 0; j < mask.t; ++j) {
      const S want = j <= i ? S(0) : static_cast<S>(kMaskSentinel);
      SE_CHECK(mask.m.at(i, j) == want, "mask entry (", i, ", ", j, ") = ", mask.m.at(i, j),
               " is not causal");
    }
  }
}

// softmax(M + Q K^T / sqrt(d)) V as one fused op. Row t only ever touches
// keys and values 0..t; entries above the diagonal carry exactly zero weight
// (the sentinel underflows), so the prefix loop reproduces the dense masked
// softmax bit for bit. The same kernel serves the streaming engine.
template <typename S>
Var masked_attention(Tape<S>& t, Var q, Var k, Var v, const CausalMask<S>& mask) {
  detail::check_same_shape(t, q, k, "masked_attention");
  detail::check_same_shape(t, q, v, "masked_attention");
  const Tensor<S>& qv = t.value(q);
  SE_CHECK(qv.rank() == 2, "masked_attention requires rank 2, got ", shape_str(qv.shape()));
  const Index frames = qv.dim(0), d = qv.dim(1);
  SE_CHECK(mask.t == frames, "mask length ", mask.t, " does not match sequence length ", frames);
  check_causal_mask(mask);
  const S inv_sqrt_d = S(1) / std::sqrt(static_cast<S>(d));
  Tensor<S> y({frames, d});
  Tensor<S> att({frames, frames});
  const Tensor<S>& kv = t.value(k);
  const Tensor<S>& vv = t.value(v);
  for (Index i = 0; i < frames; ++i) {
    kern::attention_row(qv.data() + i * d, kv.data(), d, vv.data(), d, i + 1, d, inv_sqrt_d,
                        att.data() + i * frames, y.data() + i * d);
  }
  return t.emit(
      std::move(y), t.requires_grad(q) || t.requires_grad(k) || t.requires_grad(v),
      [q, k, v, att, inv_sqrt_d, frames, d](Tape<S>& tp, Var out) {
        const auto gy = tp.grad(out).mat(frames, d);
        const auto w = att.mat(frames, frames);
        if (tp.requires_grad(v)) {
          tp.grad_buffer(v).mat(frames, d) += w.transpose() * gy;
        }
        if (!tp.requires_grad(q) && !tp.requires_grad(k)) return;
        const MatrixRM<S> gw = gy * tp.value(v).mat(frames, d).transpose();
        MatrixRM<S> gs(frames, frames);
        for (Index i = 0; i < frames; ++i) {
          const ArrayX<S> wi = w.row(i).transpose().array();
          const ArrayX<S> gwi = gw.row(i).transpose().array();
          const S dot = (gwi * wi).sum();
          gs.row(i) = (wi * (gwi - dot)).transpose() * inv_sqrt_d;
        }
        if (tp.requires_grad(q)) {
          tp.grad_buffer(q).mat(frames, d) += gs * tp.value(k).mat(frames, d);
        }
        if (tp.requires_grad(k)) {
          tp.grad_buffer(k).mat(frames, d) += gs.transpose() * tp.value(q).mat(frames, d);
        }
      },
      "masked_attention");
}

// Tape handles for one staged copy of the weights.
struct BlockVars {
  Var wq, bq, wk, bk, wv, bv, wo, bo;
  Var ff1_w, ff1_b, ff2_w, ff2_b;
  Var ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

struct GeneratorVars {
  std::vector<Var> conv_w;
  std::vector<Var> conv_b;
  std::vector<BlockVars> blocks;
  Var head_w, head_b;
};

template <typename S>
GeneratorVars stage_generator(Tape<S>& t, const GeneratorWeights<S>& w, bool requires_grad) {
  GeneratorVars gv;
  for (std::size_t i = 0; i < w.conv_w.size(); ++i) {
    gv.conv_w.push_back(t.leaf(w.conv_w[i], requires_grad));
    gv.conv_b.push_back(t.leaf(w.conv_b[i], requires_grad));
  }
  for (const BlockWeights<S>& b : w.blocks) {
    BlockVars bv;
    bv.wq = t.leaf(b.wq, requires_grad);
    bv.bq = t.leaf(b.bq, requires_grad);
    bv.wk = t.leaf(b.wk, requires_grad);
    bv.bk = t.leaf(b.bk, requires_grad);
    bv.wv = t.leaf(b.wv, requires_grad);
    bv.bv = t.leaf(b.bv, requires_grad);
    bv.wo = t.leaf(b.wo, requires_grad);
    bv.bo = t.leaf(b.bo, requires_grad);
    bv.ff1_w = t.leaf(b.ff1_w, requires_grad);
    bv.ff1_b = t.leaf(b.ff1_b, requires_grad);
    bv.ff2_w = t.leaf(b.ff2_w, requires_grad);
    bv.ff2_b = t.leaf(b.ff2_b, requires_grad);
    bv.ln1_gain = t.leaf(b.ln1_gain, requires_grad);
    bv.ln1_bias = t.leaf(b.ln1_bias, requires_grad);
    bv.ln2_gain = t.leaf(b.ln2_gain, requires_grad);
    bv.ln2_bias = t.leaf(b.ln2_bias, requires_grad);
    gv.blocks.push_back(bv);
  }
  gv.head_w = t.leaf(w.head_w, requires_grad);
  gv.head_b = t.leaf(w.head_b, requires_grad);
  return gv;
}

// Tape leaf handles in named_params order, for reading gradients back out.
inline std::vector<Var> generator_var_list(const GeneratorVars& gv) {
  std::vector<Var> vars;
  for (std::size_t i = 0; i < gv.conv_w.size(); ++i) {
    vars.push_back(gv.conv_w[i]);
    vars.push_back(gv.conv_b[i]);
  }
  for (const BlockVars& b : gv.blocks) {
    for (Var v : {b.wq, b.bq, b.wk, b.bk, b.wv, b.bv, b.wo, b.bo, b.ff1_w, b.ff1_b, b.ff2_w,
                  b.ff2_b, b.ln1_gain, b.ln1_bias, b.ln2_gain, b.ln2_bias}) {
      vars.push_back(v);
    }
  }
  vars.push_back(gv.head_w);
  vars.push_back(gv.head_b);
  return vars;
}

// Per-head projections, masked attention per head, concatenation, output
// projection.
template <typename S>
Var mhsa(Tape<S>& t, Var x, const BlockVars& b, const CausalMask<S>& mask, Index n_heads,
         Index d_k) {
  const Var q = linear(t, x, b.wq, b.bq);
  const Var k = linear(t, x, b.wk, b.bk);
  const Var v = linear(t, x, b.wv, b.bv);
  std::vector<Var> heads;
  for (Index h = 0; h < n_heads; ++h) {
    const Var qh = slice_cols(t, q, h * d_k, d_k);
    const Var kh = slice_cols(t, k, h * d_k, d_k);
    const Var vh = slice_cols(t, v, h * d_k, d_k);
    heads.push_back(masked_attention(t, qh, kh, vh, mask));
  }
  return linear(t, concat_cols(t, heads), b.wo, b.bo);
}

// y = LN(x + MHSA(x)); y = LN(y + FF(y)).
template <typename S>
Var attention_block(Tape<S>& t, Var x, const BlockVars& b, const CausalMask<S>& mask,
                    const GeneratorConfig& cfg) {
  const S eps = static_cast<S>(cfg.ln_eps);
  const Var a = mhsa(t, x, b, mask, cfg.n_heads, cfg.d_k);
  const Var y1 = layer_norm_channels(t, add(t, x, a), b.ln1_gain, b.ln1_bias, eps);
  Var f = linear(t, y1, b.ff1_w, b.ff1_b);
  f = relu(t, f);
  f = linear(t, f, b.ff2_w, b.ff2_b);
  return layer_norm_channels(t, add(t, y1, f), b.ln2_gain, b.ln2_bias, eps);
}

// Fixed position code matrix for the PE ablation, built row by row with the
// streaming kernel.
template <typename S>
Tensor<S> sinusoidal_pe_matrix(Index frames, Index d_model) {
  Tensor<S> pe({frames, d_model});
  for (Index f = 0; f < frames; ++f) kern::sinusoidal_pe_row(f, d_model, pe.data() + f * d_model);
  return pe;
}

// Conv front-end, N attention blocks, FC+ReLU head. Input and output are
// (T, F); the output is a nonnegative mask (head_mode mask) or a compressed
// magnitude estimate (head_mode map).
template <typename S>
Var generator_forward(Tape<S>& t, Var x, const GeneratorVars& gv, const GeneratorConfig& cfg) {
  cfg.validate();
  const Tensor<S>& xv = t.value(x);
  SE_CHECK(xv.rank() == 2 && xv.dim(1) == cfg.n_bins, "generator input ", shape_str(xv.shape()),
           " does not match F=", cfg.n_bins);
  const Index frames = xv.dim(0);
  Var h = x;
  for (std::size_t i = 0; i < gv.conv_w.size(); ++i) {
    h = relu(t, conv1d_causal(t, h, gv.conv_w[i], gv.conv_b[i]));
  }
  if (cfg.sinusoidal_pe) {
    h = add(t, h, t.constant(sinusoidal_pe_matrix<S>(frames, cfg.d_model)));
  }
  const CausalMask<S> mask = build_causal_mask<S>(frames);
  for (const BlockVars& b : gv.blocks) h = attention_block(t, h, b, mask, cfg);
  return relu(t, linear(t, h, gv.head_w, gv.head_b));
}

// Elementwise mask on the linear-domain noisy magnitude.
template <typename S>
Var apply_mask(Tape<S>& t, Var mask, Var noisy_linear_mag) {
  detail::check_same_shape(t, mask, noisy_linear_mag, "apply_mask");
  SE_CHECK((t.value(mask).flat() >= S(0)).all(), "apply_mask: negative mask entry");
  return hadamard(t, mask, noisy_linear_mag);
}

// The one place the mask-domain convention lives: the network emits a mask in
// response to compressed input, the mask multiplies the linear noisy
// magnitude, and losses compare in the compressed domain. Map mode emits the
// compressed estimate directly.
template <typename S>
Var enhanced_compressed(Tape<S>& t, Var gen_out, Var noisy_linear_mag, HeadMode mode) {
  if (mode == HeadMode::kMap) return gen_out;
  return log1p(t, apply_mask(t, gen_out, noisy_linear_mag));
}

}  // namespace se
