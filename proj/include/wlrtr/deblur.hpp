#pragma once

#include <chrono>
#include <cmath>
#include <optional>

#include "wlrtr/degradation.hpp"
#include "wlrtr/denoise.hpp"
#include "wlrtr/error.hpp"
#include "wlrtr/fft.hpp"
#include "wlrtr/grouping.hpp"
#include "wlrtr/shrinkage.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

struct DeblurConfig {
  GroupingConfig grouping;
  ShrinkParams shrink{.c = 16.0};
  double eta = 1e-8;
  double alpha0 = 1e-3;
  double delta = 1.5;
  int outer_iters = 10;
  unsigned threads = 0;

  void validate() const {
    grouping.validate();
    shrink.validate();
    if (!(eta > 0.0) || !(alpha0 > 0.0) || !(delta > 1.0) || outer_iters < 1) {
      throw Error(ErrorCode::invalid_argument, "deblur needs eta > 0, alpha0 > 0, delta > 1, outer_iters >= 1");
    }
  }
};

// argmin_A 1/2 ||Y - H A||^2 + alpha/2 ||X - A + J/alpha||^2, solved per band:
//   A = F^-1[(conj(H) F(Y) + alpha F(X) + F(J)) / (|H|^2 + alpha)].
inline Tensor3 deconv_step(const Tensor3& y, const Tensor3& x, const Tensor3& j, const Psf& psf, double alpha) {
  y.require_same(x);
  y.require_same(j);
  if (!(alpha >= 0.0)) throw Error(ErrorCode::invalid_argument, "alpha must be >= 0");
  const auto otf = psf_to_otf(psf, y.rows(), y.cols());
  std::vector<double> denom(otf.size());
  for (std::size_t n = 0; n < otf.size(); ++n) {
    denom[n] = std::norm(otf[n]) + alpha;
    if (denom[n] == 0.0) throw Error(ErrorCode::singular_system, "transfer function vanishes and alpha = 0");
  }
  Fft2 fft(y.rows(), y.cols());
  Tensor3 out(y.dims());
  for (std::size_t k = 0; k < y.bands(); ++k) {
    const auto fy = fft.forward(y.band(k));
    const auto fx = fft.forward(x.band(k));
    auto spec = fft.forward(j.band(k));
    for (std::size_t n = 0; n < spec.size(); ++n) {
      spec[n] = (std::conj(otf[n]) * fy[n] + alpha * fx[n] + spec[n]) / denom[n];
    }
    const auto img = fft.inverse_real(spec);
    std::copy(img.begin(), img.end(), out.band(k).begin());
  }
  return out;
}

// X(p) = (alpha (A - J/alpha)(p) + 2 eta sum(p)) / (alpha + 2 eta count(p)).
// Without a cover (first iteration) X = A - J/alpha.
inline Tensor3 reconstruct_split(const Tensor3& a, const Tensor3& j, double alpha, const CoverAccumulator* cover,
                                 double eta) {
  a.require_same(j);
  Tensor3 x(a.dims());
  for (std::size_t k = 0; k < a.bands(); ++k)
    for (std::size_t r = 0; r < a.rows(); ++r)
      for (std::size_t c = 0; c < a.cols(); ++c) {
        const double base = alpha * a(r, c, k) - j(r, c, k);
        if (cover) {
          x(r, c, k) = (base + 2.0 * eta * cover->sum()(r, c, k)) / (alpha + 2.0 * eta * cover->count()(r, c));
        } else {
          x(r, c, k) = base / alpha;
        }
      }
  return x;
}

// ADMM loop: deconvolution, image reconstruction from the latest group
// estimates, group shrinkage, multiplier update. sigma = 0 shrinks with a
// floor of 1 on the 8-bit scale.
inline Tensor3 deblur(const Tensor3& y, const Psf& psf, double sigma, const DeblurConfig& cfg,
                      SolverTrace* trace = nullptr) {
  cfg.validate();
  if (!(sigma >= 0.0)) throw Error(ErrorCode::invalid_argument, "sigma must be >= 0");
  if (!y.all_finite()) throw Error(ErrorCode::non_finite, "deblur input has non-finite samples");
  ShrinkParams shrink = cfg.shrink;
  shrink.sigma = sigma > 0.0 ? sigma : 1.0;

  Tensor3 x = y;
  Tensor3 j(y.dims());
  double alpha = cfg.alpha0;
  std::optional<GroupingPass> groups;
  for (int n = 1; n <= cfg.outer_iters; ++n) {
    const auto start = std::chrono::steady_clock::now();
    const Tensor3 a = deconv_step(y, x, j, psf, alpha);
    x = reconstruct_split(a, j, alpha, groups ? &groups->cover : nullptr, cfg.eta);
    groups = run_grouping_pass(x, cfg.grouping, GroupPrior::tensor_weighted, shrink, cfg.threads);
    Tensor3 diff = x - a;
    diff *= alpha;
    j += diff;
    if (trace) {
      const Tensor3 ha = convolve(a, psf);
      const double objective = 0.5 * squared_distance(y, ha) +
                               cfg.eta * (groups->cover.residual_sq(x) + shrink.sigma * shrink.sigma * groups->penalty);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      trace->iterations.push_back({n, shrink.sigma, objective, secs});
    }
    alpha *= cfg.delta;
  }
  if (!x.all_finite()) throw Error(ErrorCode::non_finite, "deblur produced non-finite samples");
  return x;
}

}  // namespace wlrtr
