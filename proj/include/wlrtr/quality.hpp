#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <vector>

#include "wlrtr/error.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

// Reported PSNR for an exact match.
inline constexpr double kPsnrCap = 99.0;

struct PsnrResult {
  double mean = 0.0;
  std::vector<double> per_band;
};

inline void require_same_dims(const Tensor3& x, const Tensor3& ref) {
  if (x.dims() != ref.dims()) {
    throw Error(ErrorCode::shape_mismatch, "quality index on " + to_string(x.dims()) + " vs " + to_string(ref.dims()));
  }
}

inline double band_mse(const Tensor3& x, const Tensor3& ref, std::size_t k) {
  auto a = x.band(k);
  auto b = ref.band(k);
  double acc = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) acc += (a[n] - b[n]) * (a[n] - b[n]);
  return acc / static_cast<double>(a.size());
}

// 10 log10(255^2 / MSE) per band on the 8-bit scale, averaged over bands.
inline PsnrResult psnr(const Tensor3& x, const Tensor3& ref) {
  require_same_dims(x, ref);
  PsnrResult out;
  for (std::size_t k = 0; k < x.bands(); ++k) {
    const double mse = band_mse(x, ref, k);
    out.per_band.push_back(mse == 0.0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse)));
  }
  for (double v : out.per_band) out.mean += v;
  out.mean /= static_cast<double>(out.per_band.size());
  return out;
}

namespace detail {

// 'valid' filtering of one band with a separable normalized Gaussian.
inline std::vector<double> gaussian_filter_valid(std::span<const double> img, std::size_t rows, std::size_t cols,
                                                 const std::vector<double>& w, std::size_t& out_rows,
                                                 std::size_t& out_cols) {
  const std::size_t n = w.size();
  out_rows = rows - n + 1;
  out_cols = cols - n + 1;
  std::vector<double> tmp(rows * out_cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < out_cols; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += w[t] * img[i * cols + j + t];
      tmp[i * out_cols + j] = acc;
    }
  std::vector<double> out(out_rows * out_cols, 0.0);
  for (std::size_t i = 0; i < out_rows; ++i)
    for (std::size_t j = 0; j < out_cols; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += w[t] * tmp[(i + t) * out_cols + j];
      out[i * out_cols + j] = acc;
    }
  return out;
}

}  // namespace detail

// Mean SSIM per band (11x11 Gaussian window, std 1.5, K1 = 0.01, K2 = 0.03,
// L = 255, statistics over the 'valid' region), averaged over bands. Bands
// smaller than 11 pixels use a window as large as the band allows.
inline double ssim(const Tensor3& x, const Tensor3& ref) {
  require_same_dims(x, ref);
  const std::size_t win = std::min<std::size_t>({11, x.rows(), x.cols()});
  std::vector<double> w(win);
  const double centre = (static_cast<double>(win) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t t = 0; t < win; ++t) {
    const double d = static_cast<double>(t) - centre;
    w[t] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    total += w[t];
  }
  for (double& v : w) v /= total;

  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double sum = 0.0;
  for (std::size_t k = 0; k < x.bands(); ++k) {
    const std::size_t R = x.rows(), C = x.cols();
    auto a = x.band(k);
    auto b = ref.band(k);
    std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t n = 0; n < a.size(); ++n) {
      aa[n] = a[n] * a[n];
      bb[n] = b[n] * b[n];
      ab[n] = a[n] * b[n];
    }
    std::size_t orows = 0, ocols = 0;
    const auto mu_a = detail::gaussian_filter_valid(a, R, C, w, orows, ocols);
    const auto mu_b = detail::gaussian_filter_valid(b, R, C, w, orows, ocols);
    const auto s_aa = detail::gaussian_filter_valid(aa, R, C, w, orows, ocols);
    const auto s_bb = detail::gaussian_filter_valid(bb, R, C, w, orows, ocols);
    const auto s_ab = detail::gaussian_filter_valid(ab, R, C, w, orows, ocols);
    double band_sum = 0.0;
    for (std::size_t n = 0; n < mu_a.size(); ++n) {
      const double ma = mu_a[n], mb = mu_b[n];
      const double va = s_aa[n] - ma * ma, vb = s_bb[n] - mb * mb, cov = s_ab[n] - ma * mb;
      band_sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    sum += band_sum / static_cast<double>(mu_a.size());
  }
  return sum / static_cast<double>(x.bands());
}

// (100 / s) sqrt(mean_b MSE_b / mu_b^2), mu_b the band mean of ref. Bands
// whose reference mean is zero are skipped.
inline double ergas(const Tensor3& x, const Tensor3& ref, std::size_t scale = 1) {
  require_same_dims(x, ref);
  if (scale == 0) throw Error(ErrorCode::invalid_argument, "ergas scale must be >= 1");
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < x.bands(); ++k) {
    auto b = ref.band(k);
    double mu = 0.0;
    for (double v : b) mu += v;
    mu /= static_cast<double>(b.size());
    if (mu == 0.0) {
      std::cerr << "warning: ergas skips band " << k << " (zero reference mean)\n";
      continue;
    }
    acc += band_mse(x, ref, k) / (mu * mu);
    ++used;
  }
  if (used == 0) return 0.0;
  return 100.0 / static_cast<double>(scale) * std::sqrt(acc / static_cast<double>(used));
}

// Mean spectral angle in radians over pixels where both spectra are nonzero.
inline double sam(const Tensor3& x, const Tensor3& ref) {
  require_same_dims(x, ref);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t k = 0; k < x.bands(); ++k) {
        const double a = x(i, j, k), b = ref(i, j, k);
        dot += a * b;
        na += a * a;
        nb += b * b;
      }
      if (na == 0.0 || nb == 0.0) continue;
      total += std::acos(std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0));
      ++used;
    }
  return used == 0 ? 0.0 : total / static_cast<double>(used);
}

struct QualityReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double ergas = 0.0;
  double sam = 0.0;
  std::vector<double> per_band_psnr;
};

inline QualityReport assess(const Tensor3& x, const Tensor3& ref, std::size_t scale = 1) {
  PsnrResult p = psnr(x, ref);
  return {p.mean, ssim(x, ref), ergas(x, ref, scale), sam(x, ref), std::move(p.per_band)};
}

}  // namespace wlrtr
