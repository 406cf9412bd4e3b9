#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>

#include "wlrtr/degradation.hpp"
#include "wlrtr/denoise.hpp"
#include "wlrtr/error.hpp"
#include "wlrtr/fft.hpp"
#include "wlrtr/grouping.hpp"
#include "wlrtr/parallel.hpp"
#include "wlrtr/shrinkage.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

// b x B matrix mapping B bands to b; rows nonnegative and summing to one.
class SpectralResponse {
 public:
  explicit SpectralResponse(Matrix p) : p_(std::move(p)) {
    if (p_.rows() == 0 || p_.rows() > p_.cols()) {
      throw Error(ErrorCode::invalid_argument, "spectral response needs 1 <= b <= B rows");
    }
    for (std::size_t r = 0; r < p_.rows(); ++r) {
      double total = 0.0;
      for (double v : p_.row(r)) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "response entries must be >= 0");
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-8) {
        throw Error(ErrorCode::invalid_argument, "response row " + std::to_string(r) + " does not sum to 1");
      }
    }
  }

  // Three contiguous groups of bands (fewer if bands < 3), uniform weights.
  static SpectralResponse band_groups(std::size_t bands, std::size_t groups = 3) {
    if (bands == 0 || groups == 0) throw Error(ErrorCode::invalid_argument, "need bands >= 1 and groups >= 1");
    groups = std::min(groups, bands);
    Matrix p(groups, bands);
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t lo = g * bands / groups, hi = (g + 1) * bands / groups;
      for (std::size_t k = lo; k < hi; ++k) p(g, k) = 1.0 / static_cast<double>(hi - lo);
    }
    return SpectralResponse(std::move(p));
  }

  const Matrix& matrix() const noexcept { return p_; }

 private:
  Matrix p_;
};

struct SuperresConfig {
  GroupingConfig grouping;
  ShrinkParams shrink{.c = 16.0};
  double eta = 1e-5;
  double beta0 = 1e-3;
  double gamma0 = 1e-3;
  double delta = 1.5;
  std::size_t scale = 8;
  int outer_iters = 15;
  double cg_tol = 1e-6;
  int cg_max_iters = 200;
  unsigned threads = 0;

  void validate() const {
    grouping.validate();
    shrink.validate();
    if (!(eta > 0.0) || !(beta0 > 0.0) || !(gamma0 > 0.0) || !(delta > 1.0) || scale < 1 || outer_iters < 1 ||
        !(cg_tol > 0.0) || cg_max_iters < 1) {
      throw Error(ErrorCode::invalid_argument, "invalid super-resolution configuration");
    }
  }
};

inline void require_divisible(const Tensor3& t, std::size_t s) {
  if (s == 0 || t.rows() % s != 0 || t.cols() % s != 0) {
    throw Error(ErrorCode::invalid_argument, "image " + to_string(t.dims()) + " not divisible by scale " +
                                                 std::to_string(s));
  }
}

// Blur each band, then keep the samples at (s i, s j).
inline Tensor3 downsample_spatial(const Tensor3& t, const Psf& psf, std::size_t s) {
  require_divisible(t, s);
  const Tensor3 blurred = convolve(t, psf);
  Tensor3 out(t.rows() / s, t.cols() / s, t.bands());
  for (std::size_t k = 0; k < t.bands(); ++k)
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j, k) = blurred(s * i, s * j, k);
  return out;
}

// Adjoint of downsample_spatial: zero insertion, then correlation with the kernel.
inline Tensor3 downsample_spatial_adjoint(const Tensor3& t, const Psf& psf, std::size_t s) {
  if (s == 0) throw Error(ErrorCode::invalid_argument, "scale must be >= 1");
  Tensor3 up(t.rows() * s, t.cols() * s, t.bands());
  for (std::size_t k = 0; k < t.bands(); ++k)
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t j = 0; j < t.cols(); ++j) up(s * i, s * j, k) = t(i, j, k);
  return correlate(up, psf);
}

inline Tensor3 downsample_spectral(const Tensor3& t, const SpectralResponse& sr) {
  if (sr.matrix().cols() != t.bands()) {
    throw Error(ErrorCode::shape_mismatch, "response has " + std::to_string(sr.matrix().cols()) +
                                               " columns for " + std::to_string(t.bands()) + " bands");
  }
  return nmode_product(t, sr.matrix(), 3);
}

// Separable bilinear interpolation; low-res sample i sits at high-res s i,
// positions past the last sample repeat it.
inline Tensor3 bilinear_upsample(const Tensor3& t, std::size_t s) {
  if (s == 0) throw Error(ErrorCode::invalid_argument, "scale must be >= 1");
  auto taps = [s](std::size_t p, std::size_t n) {
    const std::size_t i0 = std::min(p / s, n - 1);
    const std::size_t i1 = std::min(i0 + 1, n - 1);
    const double f = p / s >= n - 1 ? 0.0 : static_cast<double>(p % s) / static_cast<double>(s);
    return std::tuple{i0, i1, f};
  };
  Tensor3 out(t.rows() * s, t.cols() * s, t.bands());
  for (std::size_t k = 0; k < t.bands(); ++k)
    for (std::size_t p = 0; p < out.rows(); ++p) {
      const auto [r0, r1, fr] = taps(p, t.rows());
      for (std::size_t q = 0; q < out.cols(); ++q) {
        const auto [c0, c1, fc] = taps(q, t.cols());
        const double top = (1.0 - fc) * t(r0, c0, k) + fc * t(r0, c1, k);
        const double bottom = (1.0 - fc) * t(r1, c0, k) + fc * t(r1, c1, k);
        out(p, q, k) = (1.0 - fr) * top + fr * bottom;
      }
    }
  return out;
}

namespace detail {

inline Tensor3 band_slice(const Tensor3& t, std::size_t k) {
  Tensor3 out(t.rows(), t.cols(), 1);
  std::copy(t.band(k).begin(), t.band(k).end(), out.band(0).begin());
  return out;
}

// Conjugate gradient for (A + beta I) q = b, A symmetric positive semidefinite.
template <typename Apply>
Tensor3 conjugate_gradient(Apply apply_a, double beta, const Tensor3& b, Tensor3 q, double tol, int max_iters) {
  auto apply = [&](const Tensor3& v) {
    Tensor3 out = apply_a(v);
    for (std::size_t n = 0; n < v.size(); ++n) out.data()[n] += beta * v.data()[n];
    return out;
  };
  const double bnorm = fro_norm(b);
  if (bnorm == 0.0) return Tensor3(b.dims());
  Tensor3 r = b - apply(q);
  Tensor3 p = r;
  double rr = inner(r, r);
  for (int it = 0; it < max_iters; ++it) {
    if (std::sqrt(rr) <= tol * bnorm) return q;
    const Tensor3 ap = apply(p);
    const double step = rr / inner(p, ap);
    for (std::size_t n = 0; n < q.size(); ++n) {
      q.data()[n] += step * p.data()[n];
      r.data()[n] -= step * ap.data()[n];
    }
    const double rr_next = inner(r, r);
    const double ratio = rr_next / rr;
    for (std::size_t n = 0; n < p.size(); ++n) p.data()[n] = r.data()[n] + ratio * p.data()[n];
    rr = rr_next;
  }
  if (std::sqrt(rr) <= tol * bnorm) return q;
  throw Error(ErrorCode::convergence_failure,
              "conjugate gradient stopped at relative residual " + std::to_string(std::sqrt(rr) / bnorm));
}

// Cholesky factor L (lower) of a symmetric positive definite matrix.
inline Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t t = 0; t < j; ++t) d -= l(j, t) * l(j, t);
    if (!(d > 0.0)) throw Error(ErrorCode::singular_system, "matrix is not positive definite");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (std::size_t t = 0; t < j; ++t) v -= l(i, t) * l(j, t);
      l(i, j) = v / l(j, j);
    }
  }
  return l;
}

inline void cholesky_solve(const Matrix& l, std::vector<double>& x) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < i; ++t) x[i] -= l(i, t) * x[t];
    x[i] /= l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t t = i + 1; t < n; ++t) x[i] -= l(t, i) * x[t];
    x[i] /= l(i, i);
  }
}

}  // namespace detail

// Solves (T^T T + beta I) Q = T^T Y + beta X + J1 band by band with CG,
// T = downsample_spatial. X is the starting guess.
inline Tensor3 spatial_step(const Tensor3& y, const Tensor3& x, const Tensor3& j1, const Psf& psf, std::size_t s,
                            double beta, double cg_tol = 1e-6, int cg_max_iters = 200, unsigned threads = 1) {
  x.require_same(j1);
  if (!(beta > 0.0)) throw Error(ErrorCode::invalid_argument, "beta must be > 0");
  require_divisible(x, s);
  if (y.rows() * s != x.rows() || y.cols() * s != x.cols() || y.bands() != x.bands()) {
    throw Error(ErrorCode::shape_mismatch, "low-res " + to_string(y.dims()) + " does not match " +
                                               to_string(x.dims()) + " at scale " + std::to_string(s));
  }
  Tensor3 rhs = downsample_spatial_adjoint(y, psf, s);
  for (std::size_t n = 0; n < rhs.size(); ++n) rhs.data()[n] += beta * x.data()[n] + j1.data()[n];
  Tensor3 q(x.dims());
  parallel_for(x.bands(), threads, [&](std::size_t k) {
    auto normal_op = [&](const Tensor3& v) { return downsample_spatial_adjoint(downsample_spatial(v, psf, s), psf, s); };
    const Tensor3 qk = detail::conjugate_gradient(normal_op, beta, detail::band_slice(rhs, k), detail::band_slice(x, k),
                                                  cg_tol, cg_max_iters);
    std::copy(qk.band(0).begin(), qk.band(0).end(), q.band(k).begin());
  });
  return q;
}

// Solves G x3 (P^T P + gamma I) = Z x3 P^T + gamma X + J2 with one Cholesky factorization.
inline Tensor3 spectral_step(const Tensor3& z, const Tensor3& x, const Tensor3& j2, const SpectralResponse& sr,
                             double gamma) {
  x.require_same(j2);
  if (!(gamma > 0.0)) throw Error(ErrorCode::invalid_argument, "gamma must be > 0");
  const Matrix& p = sr.matrix();
  if (p.cols() != x.bands() || z.bands() != p.rows() || z.rows() != x.rows() || z.cols() != x.cols()) {
    throw Error(ErrorCode::shape_mismatch, "guide " + to_string(z.dims()) + " does not match " + to_string(x.dims()));
  }
  Matrix system = p.transposed() * p;
  for (std::size_t k = 0; k < system.rows(); ++k) system(k, k) += gamma;
  const Matrix l = detail::cholesky(system);
  Tensor3 rhs = nmode_product(z, p.transposed(), 3);
  for (std::size_t n = 0; n < rhs.size(); ++n) rhs.data()[n] += gamma * x.data()[n] + j2.data()[n];
  Tensor3 g(x.dims());
  std::vector<double> fiber(x.bands());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) {
      for (std::size_t k = 0; k < x.bands(); ++k) fiber[k] = rhs(i, j, k);
      detail::cholesky_solve(l, fiber);
      for (std::size_t k = 0; k < x.bands(); ++k) g(i, j, k) = fiber[k];
    }
  return g;
}

// Fuses the low-resolution hyperspectral Y with the high-resolution guide Z.
inline Tensor3 superres(const Tensor3& y, const Tensor3& z, const Psf& psf, const SpectralResponse& sr,
                        const SuperresConfig& cfg, SolverTrace* trace = nullptr) {
  cfg.validate();
  if (!y.all_finite() || !z.all_finite()) throw Error(ErrorCode::non_finite, "superres input has non-finite samples");
  const std::size_t s = cfg.scale;
  if (z.rows() != y.rows() * s || z.cols() != y.cols() * s) {
    throw Error(ErrorCode::shape_mismatch, "guide " + to_string(z.dims()) + " is not " + std::to_string(s) +
                                               "x the size of " + to_string(y.dims()));
  }
  if (sr.matrix().cols() != y.bands() || sr.matrix().rows() != z.bands()) {
    throw Error(ErrorCode::shape_mismatch, "response does not map the input bands onto the guide bands");
  }

  Tensor3 x = bilinear_upsample(y, s);
  Tensor3 j1(x.dims()), j2(x.dims());
  double beta = cfg.beta0, gamma = cfg.gamma0;
  const double sigma = cfg.shrink.sigma;
  std::optional<GroupingPass> groups;
  for (int n = 1; n <= cfg.outer_iters; ++n) {
    const auto start = std::chrono::steady_clock::now();
    const Tensor3 q = spatial_step(y, x, j1, psf, s, beta, cfg.cg_tol, cfg.cg_max_iters, cfg.threads);
    const Tensor3 g = spectral_step(z, x, j2, sr, gamma);
    for (std::size_t k = 0; k < x.bands(); ++k)
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) {
          double num = beta * q(r, c, k) - j1(r, c, k) + gamma * g(r, c, k) - j2(r, c, k);
          double den = beta + gamma;
          if (groups) {
            num += 2.0 * cfg.eta * groups->cover.sum()(r, c, k);
            den += 2.0 * cfg.eta * groups->cover.count()(r, c);
          }
          x(r, c, k) = num / den;
        }
    groups = run_grouping_pass(x, cfg.grouping, GroupPrior::tensor_weighted, cfg.shrink, cfg.threads);
    for (std::size_t i = 0; i < x.size(); ++i) {
      j1.data()[i] += beta * (x.data()[i] - q.data()[i]);
      j2.data()[i] += gamma * (x.data()[i] - g.data()[i]);
    }
    if (trace) {
      const double objective =
          0.5 * squared_distance(y, downsample_spatial(x, psf, s)) +
          0.5 * squared_distance(z, downsample_spectral(x, sr)) +
          cfg.eta * (groups->cover.residual_sq(x) + sigma * sigma * groups->penalty);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      trace->iterations.push_back({n, sigma, objective, secs});
    }
    beta *= cfg.delta;
    gamma *= cfg.delta;
  }
  if (!x.all_finite()) throw Error(ErrorCode::non_finite, "superres produced non-finite samples");
  return x;
}

}  // namespace wlrtr
