#include <doctest.h>

#include "se/discriminator.hpp"
#include "testutil.hpp"

using se::Index;
using se::Tensor;

TEST_CASE("discriminator parameter count matches the fixed architecture") {
  se::Rng rng(301);
  se::DiscriminatorWeights<float> w = se::DiscriminatorWeights<float>::init(rng);

  // per-layer counts: filters * c_in * k * k + filters
  CHECK(w.conv_w[0].size() + w.conv_b[0].size() == 765);
  CHECK(w.conv_w[1].size() + w.conv_b[1].size() == 18400);
  CHECK(w.conv_w[2].size() + w.conv_b[2].size() == 81040);
  CHECK(w.conv_w[3].size() + w.conv_b[3].size() == 242050);
  CHECK(w.fc1_w.size() + w.fc1_b.size() == 2550);
  CHECK(w.fc2_w.size() + w.fc2_b.size() == 510);
  CHECK(w.fc3_w.size() + w.fc3_b.size() == 11);
  CHECK(se::disc_param_count(w) == 345326);
}

TEST_CASE("discriminator scores any utterance length") {
  se::Rng rng(303);
  se::DiscriminatorWeights<float> w = se::DiscriminatorWeights<float>::init(rng);
  const Index bins = 33;
  for (Index frames : {4, 8, 17, 64, 128}) {
    const Tensor<float> e = tu::rand_tensor<float>({frames, bins}, rng, 0.0, 1.0);
    const Tensor<float> c = tu::rand_tensor<float>({frames, bins}, rng, 0.0, 1.0);
    const float score = se::disc_score(w, e, c);
    CHECK(std::isfinite(score));
  }
}

TEST_CASE("zero weights score exactly zero") {
  se::Rng rng(307);
  se::DiscriminatorWeights<double> w = se::DiscriminatorWeights<double>::init(rng);
  for (const se::NamedParam<double>& p : w.named_params()) p.tensor->flat().setZero();
  const Tensor<double> e = tu::rand_tensor<double>({6, 33}, rng, 0.0, 1.0);
  const Tensor<double> c = tu::rand_tensor<double>({6, 33}, rng, 0.0, 1.0);
  CHECK(se::disc_score(w, e, c) == 0.0);
}

TEST_CASE("every weight matrix is near unit spectral norm after warm-up") {
  se::Rng rng(311);
  se::DiscriminatorWeights<double> w = se::DiscriminatorWeights<double>::init(rng);

  const auto check_sigma = [](const se::SpectralNormState<double>& st, const Tensor<double>& t,
                              Index rows) {
    const Index cols = t.size() / rows;
    const se::MatrixRM<double> m = t.mat(rows, cols);
    const double truth = tu::top_singular_value(m);
    const double est = se::sigma_estimate(st, t);
    REQUIRE(truth > 0);
    CHECK(est / truth == doctest::Approx(1.0).epsilon(0.02));
    // and the normalized matrix lands on sigma ~= 1
    const se::MatrixRM<double> normalized = m / est;
    CHECK(tu::top_singular_value(normalized) == doctest::Approx(1.0).epsilon(0.02));
  };

  for (std::size_t i = 0; i < w.conv_w.size(); ++i) {
    check_sigma(w.conv_sn[i], w.conv_w[i], w.conv_w[i].dim(0));
  }
  check_sigma(w.fc1_sn, w.fc1_w, w.fc1_w.dim(0));
  check_sigma(w.fc2_sn, w.fc2_w, w.fc2_w.dim(0));
  check_sigma(w.fc3_sn, w.fc3_w, w.fc3_w.dim(0));
}

TEST_CASE("with zero biases the score is positively homogeneous") {
  // conv, leaky relu, pooling, and fc are all degree-1 homogeneous once
  // biases vanish, so doubling the input must exactly double the score
  se::Rng rng(313);
  se::DiscriminatorWeights<double> w = se::DiscriminatorWeights<double>::init(rng);
  w.fc1_b.flat().setZero();
  w.fc2_b.flat().setZero();
  w.fc3_b.flat().setZero();
  for (Tensor<double>& b : w.conv_b) b.flat().setZero();

  const Tensor<double> e = tu::rand_tensor<double>({5, 20}, rng, 0.0, 1.0);
  const Tensor<double> c = tu::rand_tensor<double>({5, 20}, rng, 0.0, 1.0);
  Tensor<double> e2 = e, c2 = c;
  e2.flat() *= 2.0;
  c2.flat() *= 2.0;
  const double s1 = se::disc_score(w, e, c);
  const double s2 = se::disc_score(w, e2, c2);
  CHECK(s2 == doctest::Approx(2.0 * s1).epsilon(1e-10));
}

TEST_CASE("normalized layers contract perturbations") {
  // spot check of the Lipschitz property the normalization buys: a unit
  // input change moves each normalized conv output by at most ~sigma ratio
  se::Rng rng(317);
  se::DiscriminatorWeights<double> w = se::DiscriminatorWeights<double>::init(rng);
  w.warm_up_all(30);

  const Index frames = 6, bins = 12;
  const Tensor<double> base_e = tu::rand_tensor<double>({frames, bins}, rng, 0.0, 1.0);
  const Tensor<double> clean = tu::rand_tensor<double>({frames, bins}, rng, 0.0, 1.0);
  Tensor<double> bumped = base_e;
  const Tensor<double> delta = tu::rand_tensor<double>({frames, bins}, rng, -0.1, 0.1);
  bumped.flat() += delta.flat();

  const double ds = std::abs(se::disc_score(w, bumped, clean) - se::disc_score(w, base_e, clean));
  const double dx = std::sqrt((delta.flat() * delta.flat()).sum());
  // fc biases drop out of differences; the chain of unit-norm layers keeps
  // the amplification modest (pool contracts hard, slope <= 1)
  CHECK(ds <= 5.0 * dx);
}

TEST_CASE("mismatched input pairs are rejected") {
  se::Rng rng(319);
  se::DiscriminatorWeights<float> w = se::DiscriminatorWeights<float>::init(rng);
  const Tensor<float> e = tu::rand_tensor<float>({4, 8}, rng);
  const Tensor<float> c = tu::rand_tensor<float>({4, 9}, rng);
  CHECK_THROWS_AS(se::disc_score(w, e, c), se::Error);
}
