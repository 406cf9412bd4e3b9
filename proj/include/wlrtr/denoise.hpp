#pragma once

#include <chrono>
#include <cmath>
#include <vector>

#include "wlrtr/error.hpp"
#include "wlrtr/grouping.hpp"
#include "wlrtr/shrinkage.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

struct IterationRecord {
  int iteration = 0;
  double sigma = 0.0;
  double objective = 0.0;
  double seconds = 0.0;
};

// Per-iteration log filled in by the solvers when the caller asks for it.
struct SolverTrace {
  std::vector<IterationRecord> iterations;
};

struct DenoiseConfig {
  GroupingConfig grouping;
  ShrinkParams shrink{.c = 16.0};  // shrink.sigma is the noise level of the input
  double eta = 0.1;
  int outer_iters = 4;
  double sigma_decay = 0.9;
  GroupPrior prior = GroupPrior::tensor_weighted;
  unsigned threads = 0;

  void validate() const {
    grouping.validate();
    shrink.validate();
    if (!(eta > 0.0) || outer_iters < 1 || !(sigma_decay > 0.0 && sigma_decay <= 1.0)) {
      throw Error(ErrorCode::invalid_argument, "denoise needs eta > 0, outer_iters >= 1, sigma_decay in (0, 1]");
    }
  }
};

inline double squared_distance(const Tensor3& a, const Tensor3& b) {
  a.require_same(b);
  double acc = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    const double d = a.data()[n] - b.data()[n];
    acc += d * d;
  }
  return acc;
}

// Noise left after an iteration: decay * sqrt(max(sigma^2 - mean((y - x)^2), 0)).
inline double next_sigma(double sigma, const Tensor3& y, const Tensor3& x, double decay) {
  const double mse = squared_distance(y, x) / static_cast<double>(y.size());
  return decay * std::sqrt(std::max(sigma * sigma - mse, 0.0));
}

struct DenoisePass {
  Tensor3 x;
  double objective = 0.0;
};

// One outer iteration: group on `estimate`, shrink every group at noise level
// `sigma`, then solve the quadratic image update against `target`:
//   x = (target + eta * sum_i R_i^T L_i) / (1 + eta * sum_i R_i^T R_i).
// The objective is 1/2 ||target - x||^2 + eta sum_i (||R_i x - L_i||^2 + sigma^2 ||w_i o S_i||_1).
inline DenoisePass denoise_pass(const Tensor3& target, const Tensor3& estimate, double sigma, const DenoiseConfig& cfg) {
  ShrinkParams shrink = cfg.shrink;
  shrink.sigma = sigma;
  const GroupingPass pass = run_grouping_pass(estimate, cfg.grouping, cfg.prior, shrink, cfg.threads);
  DenoisePass out{blend_with_cover(target, pass.cover, cfg.eta), 0.0};
  out.objective = 0.5 * squared_distance(target, out.x) +
                  cfg.eta * (pass.cover.residual_sq(out.x) + sigma * sigma * pass.penalty);
  return out;
}

inline Tensor3 denoise(const Tensor3& y, const DenoiseConfig& cfg, SolverTrace* trace = nullptr) {
  cfg.validate();
  if (!y.all_finite()) throw Error(ErrorCode::non_finite, "denoise input has non-finite samples");
  if (cfg.shrink.sigma == 0.0) return y;

  Tensor3 x = y;
  double sigma = cfg.shrink.sigma;
  for (int n = 1; n <= cfg.outer_iters; ++n) {
    const auto start = std::chrono::steady_clock::now();
    DenoisePass pass = denoise_pass(y, x, sigma, cfg);
    x = std::move(pass.x);
    if (trace) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      trace->iterations.push_back({n, sigma, pass.objective, secs});
    }
    sigma = next_sigma(sigma, y, x, cfg.sigma_decay);
    // At sigma = 0 every group is kept as is and a pass only pulls X back to Y.
    if (sigma == 0.0) break;
  }
  if (!x.all_finite()) throw Error(ErrorCode::non_finite, "denoise produced non-finite samples");
  return x;
}

}  // namespace wlrtr
