#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "wlrtr/error.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

// Shift-invariant blur kernel shared by all bands; entries are nonnegative
// and sum to one. The kernel's centre is at (rows/2, cols/2) (integer
// division), which is where psf-to-otf conversion places the origin.
class Psf {
 public:
  explicit Psf(Matrix kernel) : kernel_(std::move(kernel)) {
    if (kernel_.size() == 0) throw Error(ErrorCode::invalid_argument, "empty kernel");
    double total = 0.0;
    for (double v : kernel_.data()) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "kernel entries must be >= 0");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-10) {
      throw Error(ErrorCode::invalid_argument, "kernel must sum to 1 (got " + std::to_string(total) + ")");
    }
  }

  // Rescales an arbitrary nonnegative kernel to unit sum.
  static Psf normalized(Matrix kernel) {
    double total = 0.0;
    for (double v : kernel.data()) total += v;
    if (!(total > 0.0)) throw Error(ErrorCode::invalid_argument, "kernel has zero mass");
    for (double& v : kernel.data()) v /= total;
    return Psf(std::move(kernel));
  }

  static Psf delta() { return Psf(Matrix(1, 1, 1.0)); }

  const Matrix& kernel() const noexcept { return kernel_; }

 private:
  Matrix kernel_;
};

struct GaussianKernel {
  std::size_t size = 8;
  double std = 3.0;
};
struct UniformKernel {
  std::size_t size = 8;
};
struct DeltaKernel {};
using KernelSpec = std::variant<GaussianKernel, UniformKernel, DeltaKernel>;

enum class StripeMode { additive, multiplicative };

struct DegradationSpec {
  double sigma = 0.0;  // on the 8-bit scale
  double stripe_fraction = 0.0;
  double stripe_amp = 50.0;
  StripeMode stripe_mode = StripeMode::additive;
  KernelSpec kernel = DeltaKernel{};
  std::size_t scale = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma >= 0.0) || !(stripe_fraction >= 0.0 && stripe_fraction <= 1.0) || scale == 0) {
      throw Error(ErrorCode::invalid_argument, "degradation needs sigma >= 0, stripe fraction in [0,1], scale >= 1");
    }
  }
};

// Isotropic Gaussian sampled at pixel centres around (size-1)/2, uniform
// box, or a single tap; always normalized to unit sum.
inline Psf make_kernel(const KernelSpec& spec) {
  return std::visit(
      [](const auto& k) -> Psf {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DeltaKernel>) {
          return Psf::delta();
        } else if constexpr (std::is_same_v<K, UniformKernel>) {
          if (k.size == 0) throw Error(ErrorCode::invalid_argument, "kernel size must be >= 1");
          return Psf::normalized(Matrix(k.size, k.size, 1.0));
        } else {
          if (k.size == 0 || !(k.std > 0.0)) throw Error(ErrorCode::invalid_argument, "gaussian needs size >= 1, std > 0");
          Matrix m(k.size, k.size);
          const double c = (static_cast<double>(k.size) - 1.0) / 2.0;
          for (std::size_t i = 0; i < k.size; ++i)
            for (std::size_t j = 0; j < k.size; ++j) {
              const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
              m(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * k.std * k.std));
            }
          return Psf::normalized(std::move(m));
        }
      },
      spec);
}

// All simulators draw from std::mt19937_64 seeded with the given seed;
// normal samples come from std::normal_distribution.
inline Tensor3 add_gaussian_noise(const Tensor3& t, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::invalid_argument, "sigma must be >= 0");
  Tensor3 out = t;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.data()) v += sigma * normal(rng);
  return out;
}

// Per band, floor(fraction * cols) distinct columns receive either an
// additive offset in [-amp, amp] or a gain in [1 - amp/255, 1 + amp/255].
inline Tensor3 add_stripes(const Tensor3& t, const DegradationSpec& spec) {
  if (!(spec.stripe_fraction >= 0.0 && spec.stripe_fraction <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "stripe fraction must be in [0,1]");
  }
  Tensor3 out = t;
  const auto count = static_cast<std::size_t>(std::floor(spec.stripe_fraction * static_cast<double>(t.cols())));
  if (count == 0) return out;
  std::mt19937_64 rng(spec.seed ^ 0x5354524950455321ULL);
  std::uniform_real_distribution<double> offset(-spec.stripe_amp, spec.stripe_amp);
  std::uniform_real_distribution<double> gain(1.0 - spec.stripe_amp / 255.0, 1.0 + spec.stripe_amp / 255.0);
  std::vector<std::size_t> cols(t.cols());
  for (std::size_t k = 0; k < t.bands(); ++k) {
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(cols.begin(), cols.end(), rng);
    for (std::size_t n = 0; n < count; ++n) {
      const std::size_t j = cols[n];
      if (spec.stripe_mode == StripeMode::additive) {
        const double a = offset(rng);
        for (std::size_t i = 0; i < t.rows(); ++i) out(i, j, k) += a;
      } else {
        const double g = gain(rng);
        for (std::size_t i = 0; i < t.rows(); ++i) out(i, j, k) *= g;
      }
    }
  }
  return out;
}

}  // namespace wlrtr
