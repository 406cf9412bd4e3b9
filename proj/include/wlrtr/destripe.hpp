#pragma once

#include <chrono>
#include <cmath>

#include "wlrtr/denoise.hpp"
#include "wlrtr/error.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

struct DestripeConfig {
  DenoiseConfig denoise;
  double rho = 0.0;  // 0 selects rho_scale * sigma * sqrt(rows)
  double rho_scale = 10.0;
  int outer_iters = 4;
  bool horizontal = false;  // stripes along rows instead of columns

  void validate() const {
    denoise.validate();
    if (!(rho >= 0.0) || !(rho_scale > 0.0) || outer_iters < 1) {
      throw Error(ErrorCode::invalid_argument, "destripe needs rho >= 0 (0 = automatic), rho_scale > 0, outer_iters >= 1");
    }
  }

  double effective_rho(std::size_t rows) const {
    if (rho > 0.0) return rho;
    const double r = rho_scale * denoise.shrink.sigma * std::sqrt(static_cast<double>(rows));
    if (!(r > 0.0)) throw Error(ErrorCode::invalid_argument, "automatic rho needs sigma > 0; pass rho explicitly");
    return r;
  }
};

// Column-wise block soft threshold: q -> q (|q| - mu) / |q| when |q| > mu, else 0.
inline Matrix shrink_l21_columns(const Matrix& m, double mu) {
  if (!(mu >= 0.0)) throw Error(ErrorCode::invalid_argument, "mu must be >= 0");
  Matrix out = m;
  if (mu == 0.0) return out;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double norm = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) norm += m(r, c) * m(r, c);
    norm = std::sqrt(norm);
    const double scale = norm > mu ? (norm - mu) / norm : 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) out(r, c) *= scale;
  }
  return out;
}

// E = fold(shrink_l21_columns(unfold(Y - X, 1), rho)): keeps whole mode-1
// fibers (image columns) of the residual whose norm exceeds rho.
inline Tensor3 update_stripes(const Tensor3& y, const Tensor3& x, double rho) {
  y.require_same(x);
  return fold(shrink_l21_columns(unfold(y - x, 1), rho), 1, y.dims());
}

inline Tensor3 transpose_spatial(const Tensor3& t) {
  Tensor3 out(t.cols(), t.rows(), t.bands());
  for (std::size_t k = 0; k < t.bands(); ++k)
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t j = 0; j < t.cols(); ++j) out(j, i, k) = t(i, j, k);
  return out;
}

struct DestripeResult {
  Tensor3 x;  // clean image
  Tensor3 e;  // stripe component
};

// Alternates the stripe update with one denoising pass on Y - E. Stops early
// once the re-estimated noise level reaches zero.
inline DestripeResult destripe(const Tensor3& y_in, const DestripeConfig& cfg, SolverTrace* trace = nullptr) {
  cfg.validate();
  if (!y_in.all_finite()) throw Error(ErrorCode::non_finite, "destripe input has non-finite samples");
  const Tensor3 y = cfg.horizontal ? transpose_spatial(y_in) : y_in;
  const double rho = cfg.effective_rho(y.rows());

  Tensor3 x = y;
  Tensor3 e(y.dims());
  double sigma = cfg.denoise.shrink.sigma;
  for (int n = 1; n <= cfg.outer_iters; ++n) {
    const auto start = std::chrono::steady_clock::now();
    e = update_stripes(y, x, rho);
    const Tensor3 target = y - e;
    if (sigma == 0.0) {
      x = target;
      break;
    }
    DenoisePass pass = denoise_pass(target, x, sigma, cfg.denoise);
    x = std::move(pass.x);
    const double objective = pass.objective + rho * l211_norm(e);
    if (trace) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      trace->iterations.push_back({n, sigma, objective, secs});
    }
    sigma = next_sigma(sigma, target, x, cfg.denoise.sigma_decay);
    if (sigma == 0.0) break;
  }
  if (!x.all_finite()) throw Error(ErrorCode::non_finite, "destripe produced non-finite samples");
  if (cfg.horizontal) return {transpose_spatial(x), transpose_spatial(e)};
  return {std::move(x), std::move(e)};
}

}  // namespace wlrtr
