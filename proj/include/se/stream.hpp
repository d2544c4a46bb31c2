#pragma once

#include <utility>
#include <vector>

#include "se/generator.hpp"

namespace se {

// Frame-by-frame generator evaluation. Every arithmetic step is the same
// se::kern call the batch forward makes for that row, on the same values, so
// emitted frame t is bit-identical to row t of generator_forward over any
// prefix that includes it. State grows as one K/V row per block per frame.
template <typename S>
class StreamEnhancer {
 public:
  StreamEnhancer(GeneratorConfig cfg, const GeneratorWeights<S>& weights)
      : cfg_(std::move(cfg)), w_(weights) {
    cfg_.validate();
    SE_CHECK(w_.conv_w.size() == cfg_.conv_frontend.size() &&
                 w_.blocks.size() == static_cast<std::size_t>(cfg_.n_blocks),
             "weights do not match config");
    Index c_in = cfg_.n_bins;
    for (const ConvSpec& c : cfg_.conv_frontend) {
      ConvState s;
      s.c_in = c_in;
      s.c_out = c.out_channels;
      s.k_size = c.kernel_size;
      s.history.assign(static_cast<std::size_t>((c.kernel_size - 1) * c_in), S(0));
      s.window.resize(static_cast<std::size_t>(c.kernel_size * c_in));
      s.out.resize(static_cast<std::size_t>(c.out_channels));
      conv_.push_back(std::move(s));
      c_in = c.out_channels;
    }
    blocks_.resize(static_cast<std::size_t>(cfg_.n_blocks));
    for (BlockState& b : blocks_) {
      b.k_cache.resize(static_cast<std::size_t>(cfg_.n_heads));
      b.v_cache.resize(static_cast<std::size_t>(cfg_.n_heads));
    }
    const std::size_t d = static_cast<std::size_t>(cfg_.d_model);
    q_row_.resize(d);
    k_row_.resize(d);
    v_row_.resize(d);
    cat_row_.resize(d);
    att_row_.resize(d);
    sum_row_.resize(d);
    y1_row_.resize(d);
    ff_row_.resize(static_cast<std::size_t>(cfg_.d_ff));
    ff_out_.resize(d);
    pe_row_.resize(d);
  }

  const GeneratorConfig& config() const { return cfg_; }
  Index frames_processed() const { return next_; }

  // Feeds one compressed-magnitude frame; frames must arrive as 0, 1, 2, ...
  Tensor<S> push(Index frame_index, const Tensor<S>& frame) {
    SE_CHECK(frame_index == next_, "stream frame ", frame_index, " out of order, expected ",
             next_);
    SE_CHECK(frame.rank() == 1 && frame.dim(0) == cfg_.n_bins, "stream frame shape ",
             shape_str(frame.shape()), " does not match F=", cfg_.n_bins);
    std::vector<S> cur(frame.data(), frame.data() + frame.size());
    for (ConvState& s : conv_) {
      const std::size_t hist_len = s.history.size();
      std::copy(s.history.begin(), s.history.end(), s.window.begin());
      std::copy(cur.begin(), cur.end(), s.window.begin() + static_cast<std::ptrdiff_t>(hist_len));
      kern::conv1d_frame(s.window.data(), conv_weight(s).data(), conv_bias(s).data(),
                         s.out.data(), s.c_in, s.c_out, s.k_size);
      kern::relu_row(s.out.data(), s.c_out, s.out.data());
      if (hist_len > 0) {
        std::copy(s.window.begin() + static_cast<std::ptrdiff_t>(cur.size()), s.window.end(),
                  s.history.begin());
      }
      cur.assign(s.out.begin(), s.out.end());
    }
    if (cfg_.sinusoidal_pe) {
      kern::sinusoidal_pe_row(next_, cfg_.d_model, pe_row_.data());
      kern::add_rows(cur.data(), pe_row_.data(), cfg_.d_model, cur.data());
    }
    for (Index bi = 0; bi < cfg_.n_blocks; ++bi) {
      block_step(bi, cur);
    }
    Tensor<S> out({cfg_.n_bins});
    kern::affine_row(cur.data(), w_.head_w.data(), w_.head_b.data(), out.data(), cfg_.d_model,
                     cfg_.n_bins);
    kern::relu_row(out.data(), cfg_.n_bins, out.data());
    ++next_;
    return out;
  }

 private:
  struct ConvState {
    Index c_in = 0, c_out = 0, k_size = 0;
    std::vector<S> history;  // last k_size-1 input frames, oldest first
    std::vector<S> window;
    std::vector<S> out;
  };

  struct BlockState {
    std::vector<std::vector<S>> k_cache;  // per head, (frames, d_k) row-major
    std::vector<std::vector<S>> v_cache;
  };

  const Tensor<S>& conv_weight(const ConvState& s) const {
    return w_.conv_w[static_cast<std::size_t>(&s - conv_.data())];
  }
  const Tensor<S>& conv_bias(const ConvState& s) const {
    return w_.conv_b[static_cast<std::size_t>(&s - conv_.data())];
  }

  void block_step(Index bi, std::vector<S>& x) {
    const BlockWeights<S>& bw = w_.blocks[static_cast<std::size_t>(bi)];
    BlockState& bs = blocks_[static_cast<std::size_t>(bi)];
    const Index d = cfg_.d_model;
    const Index d_k = cfg_.d_k;
    const S eps = static_cast<S>(cfg_.ln_eps);
    const S inv_sqrt_d = S(1) / std::sqrt(static_cast<S>(d_k));
    kern::affine_row(x.data(), bw.wq.data(), bw.bq.data(), q_row_.data(), d, d);
    kern::affine_row(x.data(), bw.wk.data(), bw.bk.data(), k_row_.data(), d, d);
    kern::affine_row(x.data(), bw.wv.data(), bw.bv.data(), v_row_.data(), d, d);
    const Index n = next_ + 1;
    if (w_buf_.size() < static_cast<std::size_t>(n)) w_buf_.resize(static_cast<std::size_t>(n));
    for (Index h = 0; h < cfg_.n_heads; ++h) {
      std::vector<S>& kc = bs.k_cache[static_cast<std::size_t>(h)];
      std::vector<S>& vc = bs.v_cache[static_cast<std::size_t>(h)];
      kc.insert(kc.end(), k_row_.begin() + h * d_k, k_row_.begin() + (h + 1) * d_k);
      vc.insert(vc.end(), v_row_.begin() + h * d_k, v_row_.begin() + (h + 1) * d_k);
      kern::attention_row(q_row_.data() + h * d_k, kc.data(), d_k, vc.data(), d_k, n, d_k,
                          inv_sqrt_d, w_buf_.data(), cat_row_.data() + h * d_k);
    }
    kern::affine_row(cat_row_.data(), bw.wo.data(), bw.bo.data(), att_row_.data(), d, d);
    kern::add_rows(x.data(), att_row_.data(), d, sum_row_.data());
    kern::layer_norm_row(sum_row_.data(), bw.ln1_gain.data(), bw.ln1_bias.data(), d, eps,
                         y1_row_.data(), static_cast<S*>(nullptr), static_cast<S*>(nullptr));
    kern::affine_row(y1_row_.data(), bw.ff1_w.data(), bw.ff1_b.data(), ff_row_.data(), d,
                     cfg_.d_ff);
    kern::relu_row(ff_row_.data(), cfg_.d_ff, ff_row_.data());
    kern::affine_row(ff_row_.data(), bw.ff2_w.data(), bw.ff2_b.data(), ff_out_.data(), cfg_.d_ff,
                     d);
    kern::add_rows(y1_row_.data(), ff_out_.data(), d, sum_row_.data());
    kern::layer_norm_row(sum_row_.data(), bw.ln2_gain.data(), bw.ln2_bias.data(), d, eps,
                         x.data(), static_cast<S*>(nullptr), static_cast<S*>(nullptr));
  }

  GeneratorConfig cfg_;
  GeneratorWeights<S> w_;
  Index next_ = 0;
  std::vector<ConvState> conv_;
  std::vector<BlockState> blocks_;
  std::vector<S> q_row_, k_row_, v_row_, cat_row_, att_row_, sum_row_, y1_row_, ff_row_, ff_out_,
      pe_row_;
  std::vector<S> w_buf_;
};

// Convenience wrapper: batch forward without gradients, returning the raw
// network output (mask or map) for a (T, F) compressed input.
template <typename S>
Tensor<S> generator_infer(const GeneratorConfig& cfg, const GeneratorWeights<S>& w,
                          const Tensor<S>& compressed) {
  Tape<S> tape;
  const Var x = tape.constant(compressed);
  const GeneratorVars gv = stage_generator(tape, w, false);
  const Var y = generator_forward(tape, x, gv, cfg);
  return tape.value(y);
}

}  // namespace se
