#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "support/scenes.hpp"
#include "wlrtr/degradation.hpp"

using namespace wlrtr;

namespace {

double checksum(const Tensor3& t) {
  double acc = 0.0;
  for (std::size_t n = 0; n < t.size(); ++n) acc += t.data()[n] * static_cast<double>(n % 97 + 1);
  return acc;
}

std::set<std::size_t> shifted_columns(const Tensor3& a, const Tensor3& b, std::size_t k) {
  std::set<std::size_t> cols;
  for (std::size_t j = 0; j < a.cols(); ++j)
    if (a(0, j, k) != b(0, j, k)) cols.insert(j);
  return cols;
}

}  // namespace

TEST(Noise, ZeroSigmaAndDeterminism) {
  const Tensor3 t = wlrtr::testing::rank2_scene(16, 16, 3);
  EXPECT_EQ(add_gaussian_noise(t, 0.0, 1), t);
  EXPECT_EQ(add_gaussian_noise(t, 3.0, 42), add_gaussian_noise(t, 3.0, 42));
  EXPECT_NE(checksum(add_gaussian_noise(t, 3.0, 42)), checksum(add_gaussian_noise(t, 3.0, 43)));
  EXPECT_THROW(add_gaussian_noise(t, -1.0, 0), Error);
}

TEST(Noise, SampleStatistics) {
  const double sigma = 10.0;
  const Tensor3 zero(256, 256, 4);
  const Tensor3 n = add_gaussian_noise(zero, sigma, 7);
  double mean = 0.0, sq = 0.0;
  for (double v : n.data()) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(n.size());
  const double sd = std::sqrt(sq / static_cast<double>(n.size()) - mean * mean);
  EXPECT_LT(std::abs(mean), sigma * 4.0 / 256.0);
  EXPECT_LT(std::abs(sd - sigma) / sigma, 0.02);
}

TEST(Noise, NoClipping) {
  const Tensor3 n = add_gaussian_noise(Tensor3(32, 32, 2, 250.0), 20.0, 3);
  EXPECT_GT(*std::max_element(n.data().begin(), n.data().end()), 255.0);
}

TEST(Stripes, FractionZeroIsIdentity) {
  const Tensor3 t = wlrtr::testing::rank2_scene(16, 16, 3);
  DegradationSpec s;
  s.stripe_fraction = 0.0;
  EXPECT_EQ(add_stripes(t, s), t);
}

TEST(Stripes, FullFractionBound) {
  const Tensor3 t = wlrtr::testing::rank2_scene(16, 20, 3);
  DegradationSpec s;
  s.stripe_fraction = 1.0;
  s.stripe_amp = 12.0;
  s.seed = 5;
  const Tensor3 y = add_stripes(t, s);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 20; ++j) {
      const double shift = y(0, j, k) - t(0, j, k);
      EXPECT_LE(std::abs(shift), 12.0);
      EXPECT_NE(shift, 0.0);
      for (std::size_t i = 1; i < 16; ++i) EXPECT_NEAR(y(i, j, k) - t(i, j, k), shift, 1e-12);
    }
}

TEST(Stripes, CountPerBandAndBandsDiffer) {
  const Tensor3 t(8, 64, 2, 100.0);
  int differing = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DegradationSpec s;
    s.stripe_fraction = 0.3;
    s.seed = seed;
    const Tensor3 y = add_stripes(t, s);
    const auto c0 = shifted_columns(t, y, 0), c1 = shifted_columns(t, y, 1);
    EXPECT_EQ(c0.size(), 19u);
    EXPECT_EQ(c1.size(), 19u);
    differing += c0 != c1;
  }
  EXPECT_EQ(differing, 20);
}

TEST(Stripes, MultiplicativeGainRange) {
  const Tensor3 t(4, 30, 2, 100.0);
  DegradationSpec s;
  s.stripe_fraction = 0.5;
  s.stripe_amp = 51.0;
  s.stripe_mode = StripeMode::multiplicative;
  const Tensor3 y = add_stripes(t, s);
  for (double v : y.data()) {
    EXPECT_GE(v, 80.0 - 1e-9);
    EXPECT_LE(v, 120.0 + 1e-9);
  }
  EXPECT_NE(y, t);
}

TEST(Kernel, Shapes) {
  const Psf d = make_kernel(DeltaKernel{});
  EXPECT_EQ(d.kernel(), Matrix(1, 1, 1.0));
  const Psf u = make_kernel(UniformKernel{2});
  for (double v : u.kernel().data()) EXPECT_DOUBLE_EQ(v, 0.25);
  const Psf wide = make_kernel(GaussianKernel{3, 1e6});
  const auto [lo, hi] = std::minmax_element(wide.kernel().data().begin(), wide.kernel().data().end());
  EXPECT_LT(*hi - *lo, 1e-6);
}

TEST(Kernel, NormalizedAndSymmetric) {
  for (std::size_t size : {1u, 3u, 8u, 9u}) {
    const Psf g = make_kernel(GaussianKernel{size, 3.0});
    const double total = std::accumulate(g.kernel().data().begin(), g.kernel().data().end(), 0.0);
    EXPECT_NEAR(total, 1.0, 1e-10);
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j) {
        EXPECT_NEAR(g.kernel()(i, j), g.kernel()(size - 1 - i, size - 1 - j), 1e-15);
        EXPECT_NEAR(g.kernel()(i, j), g.kernel()(j, i), 1e-15);
      }
  }
}

TEST(Kernel, PsfValidation) {
  EXPECT_THROW(Psf(Matrix(2, 2, 0.3)), Error);
  Matrix neg(1, 2);
  neg(0, 0) = 1.5;
  neg(0, 1) = -0.5;
  EXPECT_THROW(Psf{neg}, Error);
  EXPECT_THROW(make_kernel(GaussianKernel{0, 1.0}), Error);
}
