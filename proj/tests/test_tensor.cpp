#include <doctest.h>

#include "se/tensor.hpp"
#include "testutil.hpp"

using se::Index;
using se::Tensor;

TEST_CASE("tensor shape and storage") {
  Tensor<double> t({2, 3});
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  CHECK(t.dim(0) == 2);
  CHECK(t.dim(1) == 3);
  for (Index i = 0; i < 6; ++i) CHECK(t.at(i) == 0.0);

  t.mat()(1, 2) = 5.0;
  CHECK(t.at(5) == 5.0);
  CHECK(t.mat(2, 3)(1, 2) == 5.0);
}

TEST_CASE("tensor constructors") {
  const Tensor<float> z = Tensor<float>::zeros({4});
  CHECK(z.flat().abs().maxCoeff() == 0.0f);

  const Tensor<float> f = Tensor<float>::full({2, 2}, 3.5f);
  CHECK(f.flat().minCoeff() == 3.5f);
  CHECK(f.flat().maxCoeff() == 3.5f);

  const Tensor<double> s = Tensor<double>::scalar(7.0);
  CHECK(s.rank() == 1);
  CHECK(s.size() == 1);
  CHECK(s.at(0) == 7.0);

  const Tensor<double> v = Tensor<double>::from_values({2, 2}, {1, 2, 3, 4});
  CHECK(v.mat()(0, 1) == 2.0);
  CHECK(v.mat()(1, 0) == 3.0);
}

TEST_CASE("tensor as_2d flattens trailing dims") {
  Tensor<double> t({3, 2, 4});
  t.at(1 * 8 + 1 * 4 + 3) = 9.0;
  auto m = t.as_2d();
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 8);
  CHECK(m(1, 7) == 9.0);
}

TEST_CASE("tensor bounds and shape checks") {
  Tensor<double> t({2, 2});
  CHECK_THROWS_AS((void)t.at(4), se::Error);
  CHECK_THROWS_AS((void)t.at(-1), se::Error);
  CHECK_THROWS_AS(Tensor<double>::from_values({2}, {1, 2, 3}), se::Error);
}

TEST_CASE("tensor finiteness probe") {
  Tensor<double> t({2});
  CHECK(t.all_finite());
  t.at(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("fan-in uniform init stays in range") {
  se::Rng rng(1);
  const Tensor<double> w = se::fan_in_uniform<double>({16, 4}, 16, rng);
  const double bound = 1.0 / 4.0;
  CHECK(w.flat().abs().maxCoeff() <= bound);
  CHECK(w.flat().abs().maxCoeff() > 0.0);
}

TEST_CASE("same seed same tensor") {
  se::Rng a(7), b(7);
  const Tensor<double> x = se::gaussian_tensor<double>({8}, a, 0.0, 1.0);
  const Tensor<double> y = se::gaussian_tensor<double>({8}, b, 0.0, 1.0);
  CHECK((x.flat() == y.flat()).all());
}
