#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "wlrtr/error.hpp"
#include "wlrtr/hosvd.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

struct ShrinkParams {
  double c = 0.04;     // weight numerator
  double eps = 1e-6;   // keeps weights finite on zero coefficients
  double sigma = 0.0;  // noise standard deviation of the group

  void validate() const {
    if (!(c > 0.0) || !(eps > 0.0) || !(sigma >= 0.0) || !std::isfinite(c) || !std::isfinite(sigma)) {
      throw Error(ErrorCode::invalid_argument, "shrink parameters need c > 0, eps > 0, sigma >= 0");
    }
  }
};

// Per-coefficient weights c / (|s| + eps), one per core entry.
class WeightTensor {
 public:
  explicit WeightTensor(Tensor3 values) : values_(std::move(values)) {
    for (double w : values_.data()) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::invalid_argument, "weights must be finite and >= 0");
    }
  }
  const Tensor3& values() const noexcept { return values_; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const { return values_(i, j, k); }

 private:
  Tensor3 values_;
};

inline WeightTensor compute_weights(const Tensor3& core, const ShrinkParams& p) {
  p.validate();
  Tensor3 w(core.dims());
  for (std::size_t n = 0; n < core.size(); ++n) w.data()[n] = p.c / (std::abs(core.data()[n]) + p.eps);
  return WeightTensor(std::move(w));
}

inline double soft_threshold(double s, double threshold) {
  const double mag = std::abs(s) - threshold;
  if (mag <= 0.0) return 0.0;
  return s < 0.0 ? -mag : mag;
}

struct WlrtrApprox {
  Tensor3 approx;        // low-rank estimate of the group
  Tensor3 core_hat;      // shrunk core
  HosvdFactors factors;  // HOSVD of the input group (core holds the raw core)
  double penalty = 0.0;  // sum of w * |core_hat|, the weighted l1 term
};

// Closed-form minimizer of ||G - S x1 U1 x2 U2 x3 U3||^2 + sigma^2 ||w o S||_1:
// take the HOSVD of G and soft-threshold each core coefficient by w sigma^2 / 2,
// with weights computed once from the raw core.
inline WlrtrApprox wlrtr_approx(const Tensor3& group, const ShrinkParams& p) {
  p.validate();
  WlrtrApprox out{Tensor3(group.dims()), Tensor3(group.dims()), hosvd(group)};
  const Tensor3& core = out.factors.core;
  const WeightTensor w = compute_weights(core, p);
  const double half_var = 0.5 * p.sigma * p.sigma;
  for (std::size_t n = 0; n < core.size(); ++n) {
    const double weight = w.values().data()[n];
    const double s = soft_threshold(core.data()[n], weight * half_var);
    out.core_hat.data()[n] = s;
    out.penalty += weight * std::abs(s);
  }
  if (p.sigma == 0.0) {
    out.approx = group;
  } else {
    out.approx = reconstruct(HosvdFactors{out.core_hat, out.factors.u1, out.factors.u2, out.factors.u3});
  }
  return out;
}

// Same decomposition with one threshold for every coefficient (the
// unweighted nuclear-norm analogue).
inline WlrtrApprox uniform_tensor_approx(const Tensor3& group, double threshold) {
  if (!(threshold >= 0.0)) throw Error(ErrorCode::invalid_argument, "threshold must be >= 0");
  WlrtrApprox out{Tensor3(group.dims()), Tensor3(group.dims()), hosvd(group)};
  const Tensor3& core = out.factors.core;
  for (std::size_t n = 0; n < core.size(); ++n) {
    out.core_hat.data()[n] = soft_threshold(core.data()[n], threshold);
    out.penalty += std::abs(out.core_hat.data()[n]);
  }
  out.approx = reconstruct(HosvdFactors{out.core_hat, out.factors.u1, out.factors.u2, out.factors.u3});
  return out;
}

// Singular value soft-thresholding with a per-singular-value threshold
// produced by `threshold_of(s)`. Uses the left basis of m and the row norms
// of U^T m, which equals U max(S - t, 0) V^T without forming V.
template <typename ThresholdFn>
Matrix singular_value_shrink(const Matrix& m, ThresholdFn threshold_of, double* penalty = nullptr) {
  const Matrix u = left_singular_basis(m);
  Matrix coeff = u.transposed() * m;
  for (std::size_t r = 0; r < coeff.rows(); ++r) {
    auto row = coeff.row(r);
    double norm = 0.0;
    for (double x : row) norm += x * x;
    norm = std::sqrt(norm);
    const double shrunk = std::max(norm - threshold_of(norm), 0.0);
    if (penalty) *penalty += shrunk * threshold_of(norm);
    const double scale = norm > 0.0 ? shrunk / norm : 0.0;
    for (double& x : row) x *= scale;
  }
  return u * coeff;
}

// U max(S - lambda, 0) V^T.
inline Matrix matrix_wnn_shrink(const Matrix& m, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::invalid_argument, "lambda must be >= 0");
  if (lambda == 0.0) return m;
  return singular_value_shrink(m, [lambda](double) { return lambda; });
}

// Weighted singular value thresholding of a matrix: threshold c sigma^2 /
// (2 (s + eps)) per singular value, the 2-D counterpart of wlrtr_approx.
inline Matrix matrix_weighted_shrink(const Matrix& m, const ShrinkParams& p, double* penalty = nullptr) {
  p.validate();
  if (p.sigma == 0.0) return m;
  const double half_var = 0.5 * p.sigma * p.sigma;
  double weighted = 0.0;
  Matrix out = singular_value_shrink(
      m, [&](double s) { return p.c / (s + p.eps) * half_var; }, &weighted);
  if (penalty) *penalty += weighted / half_var;
  return out;
}

// How a group is approximated inside the solvers.
enum class GroupPrior {
  tensor_weighted,  // wlrtr_approx
  tensor_uniform,   // HOSVD with one threshold
  matrix_mode2,     // weighted SVT of the mode-2 unfolding (non-local similarity only)
  matrix_mode3,     // weighted SVT of the mode-3 unfolding (spectral correlation only)
};

struct GroupEstimate {
  Tensor3 approx;
  double penalty = 0.0;
};

// Uniform prior threshold is the weight a coefficient of magnitude sigma would
// receive, i.e. c sigma / 2, applied to every coefficient alike.
inline GroupEstimate approximate_group(const Tensor3& group, GroupPrior prior, const ShrinkParams& p) {
  switch (prior) {
    case GroupPrior::tensor_weighted: {
      WlrtrApprox a = wlrtr_approx(group, p);
      return {std::move(a.approx), a.penalty};
    }
    case GroupPrior::tensor_uniform: {
      p.validate();
      if (p.sigma == 0.0) return {group, 0.0};
      const double weight = p.c / (p.sigma + p.eps);
      WlrtrApprox a = uniform_tensor_approx(group, 0.5 * weight * p.sigma * p.sigma);
      return {std::move(a.approx), weight * a.penalty};
    }
    case GroupPrior::matrix_mode2:
    case GroupPrior::matrix_mode3: {
      const int mode = prior == GroupPrior::matrix_mode2 ? 2 : 3;
      double penalty = 0.0;
      Matrix shrunk = matrix_weighted_shrink(unfold(group, mode), p, &penalty);
      return {fold(shrunk, mode, group.dims()), penalty};
    }
  }
  throw Error(ErrorCode::invalid_argument, "unknown group prior");
}

}  // namespace wlrtr
