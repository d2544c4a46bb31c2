#include <doctest.h>

#include "se/discriminator.hpp"
#include "se/generator.hpp"
#include "se/spectral_norm.hpp"
#include "testutil.hpp"

using se::Index;
using se::Tape;
using se::Tensor;
using se::Var;
using tu::GraphFn;

namespace {

// Runs `trials` draws of shapes through the FD harness and reports the worst
// relative error seen.
double sweep(const GraphFn& build, const std::vector<se::Shape>& shapes, int trials, se::Rng& rng,
             double lo = -1.0, double hi = 1.0) {
  double worst = 0;
  for (int i = 0; i < trials; ++i) {
    std::vector<Tensor<double>> inputs;
    for (const se::Shape& s : shapes) inputs.push_back(tu::rand_tensor<double>(s, rng, lo, hi));
    worst = std::max(worst, tu::grad_check(build, std::move(inputs), rng).max_rel);
  }
  return worst;
}

}  // namespace

TEST_CASE("elementwise primitives pass finite differences") {
  se::Rng rng(101);
  const int n = 50;

  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) { return se::add(t, v[0], v[1]); },
              {{2, 3}, {2, 3}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) { return se::mul_scalar(t, v[0], -1.7); },
              {{4}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) { return se::hadamard(t, v[0], v[1]); },
              {{3, 2}, {3, 2}}, n, rng) < tu::kPrimitiveTol);
  // keep relu/leaky inputs away from the kink at 0
  const auto away_from_zero = [&](double sign) {
    Tensor<double> x = tu::rand_tensor<double>({3, 3}, rng, 0.2, 1.0);
    if (sign < 0) x.flat() = -x.flat();
    return x;
  };
  for (int i = 0; i < n; ++i) {
    std::vector<Tensor<double>> in{away_from_zero(i % 2 == 0 ? 1.0 : -1.0)};
    CHECK(tu::grad_check([](Tape<double>& t, const std::vector<Var>& v) { return se::relu(t, v[0]); },
                         in, rng)
              .max_rel < tu::kPrimitiveTol);
    CHECK(tu::grad_check(
              [](Tape<double>& t, const std::vector<Var>& v) { return se::leaky_relu(t, v[0], 0.3); },
              in, rng)
              .max_rel < tu::kPrimitiveTol);
  }
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) { return se::sigmoid(t, v[0]); },
              {{2, 4}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) { return se::log1p(t, v[0]); },
              {{2, 4}}, n, rng, -0.5, 2.0) < tu::kPrimitiveTol);
  CHECK(sweep(
            [](Tape<double>& t, const std::vector<Var>& v) { return se::softmax_last_dim(t, v[0]); },
            {{3, 4}}, n, rng) < tu::kPrimitiveTol);
}

TEST_CASE("linear algebra primitives pass finite differences") {
  se::Rng rng(103);
  const int n = 50;
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) { return se::matmul(t, v[0], v[1]); },
              {{3, 4}, {4, 2}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep(
            [](Tape<double>& t, const std::vector<Var>& v) { return se::linear(t, v[0], v[1], v[2]); },
            {{3, 4}, {4, 2}, {2}}, n, rng) < tu::kPrimitiveTol);
}

TEST_CASE("reductions and losses pass finite differences") {
  se::Rng rng(107);
  const int n = 50;
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) { return se::mean_all(t, v[0]); },
              {{3, 3}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) { return se::sum_all(t, v[0]); },
              {{2, 5}}, n, rng) < tu::kPrimitiveTol);
  // abs_mean has a kink where a == b; disjoint ranges keep FD valid
  for (int i = 0; i < n; ++i) {
    std::vector<Tensor<double>> in{tu::rand_tensor<double>({2, 3}, rng, 1.0, 2.0),
                                   tu::rand_tensor<double>({2, 3}, rng, -2.0, -1.0)};
    CHECK(tu::grad_check(
              [](Tape<double>& t, const std::vector<Var>& v) { return se::abs_mean(t, v[0], v[1]); },
              std::move(in), rng)
              .max_rel < tu::kPrimitiveTol);
  }
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) {
          return se::squared_error_mean(t, v[0], v[1]);
        },
              {{2, 3}, {2, 3}}, n, rng) < tu::kPrimitiveTol);
}

TEST_CASE("shape primitives pass finite differences") {
  se::Rng rng(109);
  const int n = 50;
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) {
          return se::reshape(t, v[0], {6});
        },
              {{2, 3}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) {
          return se::slice_cols(t, v[0], 1, 2);
        },
              {{3, 5}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) {
          return se::concat_cols(t, {v[0], v[1], v[2]});
        },
              {{3, 2}, {3, 1}, {3, 3}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) {
          return se::stack_channels(t, v[0], v[1]);
        },
              {{3, 4}, {3, 4}}, n, rng) < tu::kPrimitiveTol);
}

TEST_CASE("convolutions, norm, pool pass finite differences") {
  se::Rng rng(113);
  const int n = 20;
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) {
          return se::conv1d_causal(t, v[0], v[1], v[2]);
        },
              {{5, 3}, {2, 3, 3}, {2}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) {
          return se::conv2d_same(t, v[0], v[1], v[2]);
        },
              {{2, 4, 5}, {3, 2, 3, 3}, {3}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) {
          return se::layer_norm_channels(t, v[0], v[1], v[2], 1e-5);
        },
              {{3, 6}, {6}, {6}}, n, rng) < tu::kPrimitiveTol);
  CHECK(sweep([](Tape<double>& t, const std::vector<Var>& v) {
          return se::global_avg_pool2d(t, v[0]);
        },
              {{3, 2, 4}}, n, rng) < tu::kPrimitiveTol);
}

TEST_CASE("attention and spectral normalization pass finite differences") {
  se::Rng rng(127);
  const Index frames = 4, d_k = 3;
  const se::CausalMask<double> mask = se::build_causal_mask<double>(frames);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    std::vector<Tensor<double>> in{tu::rand_tensor<double>({frames, d_k}, rng),
                                   tu::rand_tensor<double>({frames, d_k}, rng),
                                   tu::rand_tensor<double>({frames, d_k}, rng)};
    worst = std::max(worst, tu::grad_check(
                                [&](Tape<double>& t, const std::vector<Var>& v) {
                                  return se::masked_attention(t, v[0], v[1], v[2], mask);
                                },
                                std::move(in), rng)
                                .max_rel);
  }
  CHECK(worst < tu::kPrimitiveTol);

  // u and v are held fixed inside the op, so FD against the same state is exact
  worst = 0;
  for (int i = 0; i < 20; ++i) {
    Tensor<double> w = tu::rand_tensor<double>({4, 6}, rng);
    se::SpectralNormState<double> state;
    state.init(4, 6, rng);
    se::warm_up(state, w, 20);
    worst = std::max(worst, tu::grad_check(
                                [&](Tape<double>& t, const std::vector<Var>& v) {
                                  return se::spectral_normalize(t, v[0], state);
                                },
                                {w}, rng)
                                .max_rel);
  }
  CHECK(worst < tu::kPrimitiveTol);
}

TEST_CASE("composite MLP gradient matches finite differences") {
  se::Rng rng(131);
  const GraphFn mlp = [](Tape<double>& t, const std::vector<Var>& v) {
    const Var h = se::relu(t, se::linear(t, v[0], v[1], v[2]));
    const Var out = se::sigmoid(t, se::linear(t, h, v[3], v[4]));
    return out;
  };
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    std::vector<Tensor<double>> in{
        tu::rand_tensor<double>({3, 4}, rng), tu::rand_tensor<double>({4, 5}, rng),
        tu::rand_tensor<double>({5}, rng, 0.1, 0.5), tu::rand_tensor<double>({5, 2}, rng),
        tu::rand_tensor<double>({2}, rng)};
    worst = std::max(worst, tu::grad_check(mlp, std::move(in), rng).max_rel);
  }
  CHECK(worst < tu::kCompositeTol);
}

TEST_CASE("toy generator gradient matches finite differences") {
  se::Rng rng(137);
  se::GeneratorConfig cfg;
  cfg.n_blocks = 1;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.d_k = 4;
  cfg.d_ff = 8;
  cfg.conv_frontend = {{8, 2, 1}};
  cfg.n_bins = 5;
  cfg.validate();
  const Index frames = 4;

  se::GeneratorWeights<double> w = se::GeneratorWeights<double>::init(cfg, rng);
  const std::vector<se::NamedParam<double>> named = w.named_params();
  const Tensor<double> x = tu::rand_tensor<double>({frames, cfg.n_bins}, rng, 0.0, 1.0);

  // finite differences over every weight scalar of the staged generator
  std::vector<Tensor<double>> inputs;
  inputs.push_back(x);
  for (const se::NamedParam<double>& p : named) inputs.push_back(*p.tensor);

  // v[0] is the input; v[1..] are the parameters in named order
  const GraphFn gen = [&](Tape<double>& t, const std::vector<Var>& v) {
    se::GeneratorVars gv;
    std::size_t cursor = 1;
    for (std::size_t c = 0; c < cfg.conv_frontend.size(); ++c) {
      gv.conv_w.push_back(v[cursor++]);
      gv.conv_b.push_back(v[cursor++]);
    }
    for (Index b = 0; b < cfg.n_blocks; ++b) {
      se::BlockVars bv;
      bv.wq = v[cursor++];
      bv.bq = v[cursor++];
      bv.wk = v[cursor++];
      bv.bk = v[cursor++];
      bv.wv = v[cursor++];
      bv.bv = v[cursor++];
      bv.wo = v[cursor++];
      bv.bo = v[cursor++];
      bv.ff1_w = v[cursor++];
      bv.ff1_b = v[cursor++];
      bv.ff2_w = v[cursor++];
      bv.ff2_b = v[cursor++];
      bv.ln1_gain = v[cursor++];
      bv.ln1_bias = v[cursor++];
      bv.ln2_gain = v[cursor++];
      bv.ln2_bias = v[cursor++];
      gv.blocks.push_back(bv);
    }
    gv.head_w = v[cursor++];
    gv.head_b = v[cursor++];
    return se::generator_forward(t, v[0], gv, cfg);
  };
  const tu::FdReport report = tu::grad_check(gen, std::move(inputs), rng);
  CHECK(report.max_rel < tu::kCompositeTol);
}

TEST_CASE("discriminator gradient matches finite differences on sampled weights") {
  se::Rng rng(139);
  se::DiscriminatorWeights<double> dw = se::DiscriminatorWeights<double>::init(rng);
  const Index frames = 5, bins = 6;
  const Tensor<double> enh = tu::rand_tensor<double>({frames, bins}, rng, 0.0, 1.0);
  const Tensor<double> clean = tu::rand_tensor<double>({frames, bins}, rng, 0.0, 1.0);

  Tape<double> t;
  const se::DiscVars dv = se::stage_discriminator(t, dw, true);
  const Var score = se::disc_forward(t, t.constant(enh), t.constant(clean), dv, dw);
  t.backward(score);

  const std::vector<se::NamedParam<double>> named = dw.named_params();
  const std::vector<Var> vars = se::discriminator_var_list(dv);
  REQUIRE(named.size() == vars.size());

  const auto score_value = [&]() {
    Tape<double> tp;
    const se::DiscVars dvp = se::stage_discriminator(tp, dw, false);
    return tp.value(se::disc_forward(tp, tp.constant(enh), tp.constant(clean), dvp, dw)).at(0);
  };

  // A handful of scalar coordinates per layer keeps the check under a second.
  // The leaky-relu kinks make finite differences invalid for probes whose
  // +-h interval straddles a preactivation zero. A kink at any offset inside
  // the interval splits the forward and backward one-sided slopes by exactly
  // twice the contamination of the central estimate, so probes with a large
  // one-sided split are skipped rather than compared.
  const double h = 1e-5;  // small enough in double that kink straddles are rare
  const double f0 = score_value();
  std::uniform_int_distribution<Index> pick;
  double worst = 0;
  int valid = 0, skipped = 0;
  for (std::size_t li = 0; li < named.size(); ++li) {
    const Tensor<double> analytic = t.has_grad(vars[li])
                                        ? t.grad(vars[li])
                                        : Tensor<double>::zeros(named[li].tensor->shape());
    for (int s = 0; s < 3; ++s) {
      const Index j = pick(rng) % named[li].tensor->size();
      double& slot = named[li].tensor->at(j);
      const double saved = slot;
      slot = saved + h;
      const double up = score_value();
      slot = saved - h;
      const double down = score_value();
      slot = saved;
      const double fd_fwd = (up - f0) / h;
      const double fd_bwd = (f0 - down) / h;
      const double fd = (fd_fwd + fd_bwd) / 2;
      const double g = analytic.at(j);
      const double denom = std::max(std::abs(fd), std::abs(g));
      if (denom <= 1e-6) {
        ++valid;  // both estimates negligible, nothing to compare
        continue;
      }
      if (std::abs(fd_fwd - fd_bwd) > std::max(2e-3 * denom, 1e-7)) {
        ++skipped;  // kink inside the interval, finite differences meaningless
        continue;
      }
      ++valid;
      worst = std::max(worst, std::abs(fd - g) / denom);
    }
  }
  INFO("valid probes: " << valid << ", kink-straddling skipped: " << skipped);
  CHECK(valid >= 2 * skipped);  // kinks are rare; most probes must count
  CHECK(worst < tu::kCompositeTol);
}
