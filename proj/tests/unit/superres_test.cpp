#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "support/scenes.hpp"
#include "wlrtr/quality.hpp"
#include "wlrtr/superres.hpp"

using namespace wlrtr;
using wlrtr::testing::random_tensor;

namespace {

Psf random_psf(std::size_t r, std::size_t c, std::uint64_t seed) {
  return Psf::normalized(unfold(random_tensor({r, c, 1}, seed, 0.0, 1.0), 1));
}

SpectralResponse random_response(std::size_t b, std::size_t B, std::uint64_t seed) {
  Matrix p = wlrtr::testing::random_matrix(b, B, seed);
  for (std::size_t r = 0; r < b; ++r) {
    double total = 0.0;
    for (double& v : p.row(r)) total += (v = std::abs(v) + 0.05);
    for (double& v : p.row(r)) v /= total;
  }
  return SpectralResponse(std::move(p));
}

}  // namespace

TEST(SpatialDownsample, Cases) {
  const Tensor3 t = random_tensor({6, 6, 2}, 1);
  EXPECT_EQ(downsample_spatial(t, Psf::delta(), 1), t);
  const Tensor3 flat = downsample_spatial(Tensor3(8, 8, 2, 4.0), make_kernel(GaussianKernel{3, 1.0}), 4);
  EXPECT_EQ(flat.dims(), (Dims{2, 2, 2}));
  for (double v : flat.data()) EXPECT_NEAR(v, 4.0, 1e-12);

  Tensor3 ramp(8, 8, 1);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) ramp(i, j, 0) = static_cast<double>(8 * i + j);
  const Tensor3 sub = downsample_spatial(ramp, Psf::delta(), 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(sub(i, j, 0), static_cast<double>(16 * i + 2 * j), 1e-12);

  EXPECT_THROW(downsample_spatial(Tensor3(9, 8, 1), Psf::delta(), 2), Error);
}

TEST(SpatialDownsample, MatchesDirectFormula) {
  const Tensor3 t = random_tensor({12, 16, 2}, 2);
  const Psf psf = random_psf(4, 3, 3);
  const Tensor3 fast = downsample_spatial(t, psf, 4), slow = wlrtr::testing::direct_convolve(t, psf.kernel(), 4);
  for (std::size_t n = 0; n < fast.size(); ++n) EXPECT_NEAR(fast.data()[n], slow.data()[n], 1e-12);
}

TEST(SpatialDownsample, AdjointIdentity) {
  const Psf psf = make_kernel(GaussianKernel{8, 3.0});
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Tensor3 a = random_tensor({16, 24, 2}, seed);
    const Tensor3 b = random_tensor({4, 6, 2}, seed + 1000);
    const double lhs = inner(downsample_spatial(a, psf, 4), b);
    const double rhs = inner(a, downsample_spatial_adjoint(b, psf, 4));
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(SpectralDownsample, Cases) {
  const Tensor3 t = random_tensor({3, 4, 5}, 4);
  const Tensor3 mean = downsample_spectral(t, SpectralResponse(Matrix(1, 5, 0.2)));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 5; ++k) acc += t(i, j, k);
      EXPECT_NEAR(mean(i, j, 0), acc / 5.0, 1e-14);
    }
  EXPECT_EQ(downsample_spectral(t, SpectralResponse(Matrix::identity(5))), t);

  const Tensor3 two = random_tensor({3, 3, 2}, 5);
  Matrix p(1, 2);
  p(0, 0) = 0.3;
  p(0, 1) = 0.7;
  const Tensor3 w = downsample_spectral(two, SpectralResponse(p));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(w(i, j, 0), 0.3 * two(i, j, 0) + 0.7 * two(i, j, 1), 1e-15);
  EXPECT_THROW(downsample_spectral(t, SpectralResponse(Matrix(1, 4, 0.25))), Error);
}

TEST(SpectralResponse, Validation) {
  EXPECT_THROW(SpectralResponse(Matrix(1, 3, 0.3)), Error);
  EXPECT_THROW(SpectralResponse(Matrix(4, 3, 1.0 / 3.0)), Error);
  const SpectralResponse g = SpectralResponse::band_groups(8);
  EXPECT_EQ(g.matrix().rows(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    double total = 0.0;
    for (double v : g.matrix().row(r)) total += v;
    EXPECT_NEAR(total, 1.0, 1e-15);
  }
  for (std::size_t k = 0; k < 8; ++k) {
    int owners = 0;
    for (std::size_t r = 0; r < 3; ++r) owners += g.matrix()(r, k) > 0.0;
    EXPECT_EQ(owners, 1);
  }
}

TEST(SpatialStep, IdentityOperatorClosedForm) {
  const Tensor3 y = random_tensor({6, 6, 2}, 6), x = random_tensor({6, 6, 2}, 7), j = random_tensor({6, 6, 2}, 8);
  const double beta = 0.4;
  const Tensor3 q = spatial_step(y, x, j, Psf::delta(), 1, beta);
  for (std::size_t n = 0; n < q.size(); ++n)
    EXPECT_NEAR(q.data()[n], (y.data()[n] + beta * x.data()[n] + j.data()[n]) / (1.0 + beta), 1e-6);
}

TEST(SpatialStep, LargeBetaLimit) {
  const Tensor3 x = random_tensor({8, 8, 2}, 9), j = random_tensor({8, 8, 2}, 10);
  const Tensor3 y = random_tensor({2, 2, 2}, 11);
  const Tensor3 q = spatial_step(y, x, j, make_kernel(GaussianKernel{3, 1.0}), 4, 1e9);
  for (std::size_t n = 0; n < q.size(); ++n) EXPECT_NEAR(q.data()[n], x.data()[n], 1e-6);
}

TEST(SpatialStep, MatchesDenseOperatorSolve) {
  const Psf psf = random_psf(3, 3, 12);
  const Tensor3 y = random_tensor({4, 4, 2}, 13), x = random_tensor({8, 8, 2}, 14), j = random_tensor({8, 8, 2}, 15);
  const double beta = 0.05;
  const Tensor3 q = spatial_step(y, x, j, psf, 2, beta, 1e-12, 500);

  const Matrix t = wlrtr::testing::dense_operator(psf.kernel(), 8, 8, 2);
  ASSERT_EQ(t.rows(), 16u);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto want = wlrtr::testing::dense_regularized_solve(t, y.band(k), x.band(k), j.band(k), beta);
    for (std::size_t p = 0; p < 64; ++p) EXPECT_NEAR(q.band(k)[p], want[p], 1e-6);
  }
}

TEST(SpatialStep, ReportsNonConvergence) {
  const Tensor3 y = random_tensor({4, 4, 1}, 16), x = random_tensor({16, 16, 1}, 17);
  try {
    spatial_step(y, x, Tensor3(x.dims()), make_kernel(GaussianKernel{9, 2.0}), 4, 1e-9, 1e-14, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::convergence_failure);
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
  }
}

TEST(SpectralStep, IdentityResponse) {
  const Tensor3 z = random_tensor({4, 4, 3}, 18), x = random_tensor({4, 4, 3}, 19), j = random_tensor({4, 4, 3}, 20);
  const double gamma = 0.7;
  const Tensor3 g = spectral_step(z, x, j, SpectralResponse(Matrix::identity(3)), gamma);
  for (std::size_t n = 0; n < g.size(); ++n)
    EXPECT_NEAR(g.data()[n], (z.data()[n] + gamma * x.data()[n] + j.data()[n]) / (1.0 + gamma), 1e-13);
}

TEST(SpectralStep, LargeGammaAndResidual) {
  const SpectralResponse sr = random_response(2, 4, 21);
  const Tensor3 z = random_tensor({5, 3, 2}, 22), x = random_tensor({5, 3, 4}, 23), j = random_tensor({5, 3, 4}, 24);
  const double gamma = 0.01;
  const Tensor3 g = spectral_step(z, x, j, sr, gamma);
  const Matrix& p = sr.matrix();
  Matrix system = p.transposed() * p;
  for (std::size_t k = 0; k < 4; ++k) system(k, k) += gamma;
  Tensor3 lhs = nmode_product(g, system, 3);
  Tensor3 rhs = nmode_product(z, p.transposed(), 3) + gamma * x + j;
  EXPECT_LT(fro_norm(lhs - rhs), 1e-8);

  const Tensor3 far = spectral_step(z, x, j, sr, 1e9);
  for (std::size_t n = 0; n < far.size(); ++n) EXPECT_NEAR(far.data()[n], x.data()[n], 1e-6);
}

TEST(Bilinear, Cases) {
  const Tensor3 t = random_tensor({3, 4, 2}, 25);
  EXPECT_EQ(bilinear_upsample(t, 1), t);
  const Tensor3 up = bilinear_upsample(t, 2);
  EXPECT_EQ(up.dims(), (Dims{6, 8, 2}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(up(2 * i, 2 * j, 1), t(i, j, 1));
  EXPECT_NEAR(up(1, 1, 0), 0.25 * (t(0, 0, 0) + t(0, 1, 0) + t(1, 0, 0) + t(1, 1, 0)), 1e-14);
  EXPECT_EQ(up(5, 7, 0), t(2, 3, 0));
}

TEST(Superres, NoDegradationReturnsInput) {
  const Tensor3 truth = wlrtr::testing::mixture_scene(16, 16, 3);
  SuperresConfig cfg;
  cfg.grouping = {.patch = 4, .k = 8, .window = 6, .stride = 2};
  cfg.scale = 1;
  cfg.outer_iters = 4;
  cfg.threads = 1;
  const Tensor3 x = superres(truth, truth, Psf::delta(), SpectralResponse(Matrix::identity(3)), cfg);
  for (std::size_t n = 0; n < x.size(); ++n) EXPECT_NEAR(x.data()[n], truth.data()[n], 1e-3);
}

TEST(Superres, SmallFusionImprovesOnInterpolation) {
  const Tensor3 truth = wlrtr::testing::mixture_scene(32, 32, 6);
  const Psf psf = make_kernel(GaussianKernel{4, 1.5});
  const SpectralResponse sr = SpectralResponse::band_groups(6);
  const Tensor3 y = downsample_spatial(truth, psf, 4);
  const Tensor3 z = downsample_spectral(truth, sr);
  SuperresConfig cfg;
  cfg.grouping = {.patch = 4, .k = 12, .window = 8, .stride = 2};
  cfg.scale = 4;
  cfg.outer_iters = 6;
  cfg.threads = 1;
  SolverTrace trace;
  const Tensor3 x = superres(y, z, psf, sr, cfg, &trace);
  EXPECT_EQ(trace.iterations.size(), 6u);
  EXPECT_GT(psnr(x, truth).mean, psnr(bilinear_upsample(y, 4), truth).mean);
  EXPECT_LT(sam(x, truth), sam(bilinear_upsample(y, 4), truth));
  EXPECT_THROW(superres(y, z, psf, sr, [&] { auto c = cfg; c.scale = 2; return c; }()), Error);
}
