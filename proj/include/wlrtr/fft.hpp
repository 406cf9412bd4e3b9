#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "wlrtr/degradation.hpp"
#include "wlrtr/error.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

using Complex = std::complex<double>;

namespace detail {
// FFTW planning is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Unnormalized 2-D DFT of a rows x cols real image and its inverse
// (scaled by 1/(rows*cols)).
class Fft2 {
 public:
  Fft2(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), buf_(rows * cols) {
    if (rows == 0 || cols == 0) throw Error(ErrorCode::invalid_argument, "fft size must be positive");
    auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
    std::lock_guard lock(detail::fftw_planner_mutex());
    fwd_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!fwd_ || !inv_) throw Error(ErrorCode::invalid_argument, "fftw could not plan the transform");
  }
  ~Fft2() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  std::vector<Complex> forward(std::span<const double> img) {
    check(img.size());
    for (std::size_t n = 0; n < img.size(); ++n) buf_[n] = img[n];
    fftw_execute(fwd_);
    return buf_;
  }

  std::vector<Complex> forward(std::span<const Complex> spec) {
    check(spec.size());
    std::copy(spec.begin(), spec.end(), buf_.begin());
    fftw_execute(fwd_);
    return buf_;
  }

  // Real part of the normalized inverse transform.
  std::vector<double> inverse_real(std::span<const Complex> spec) {
    check(spec.size());
    std::copy(spec.begin(), spec.end(), buf_.begin());
    fftw_execute(inv_);
    const double scale = 1.0 / static_cast<double>(buf_.size());
    std::vector<double> out(buf_.size());
    for (std::size_t n = 0; n < buf_.size(); ++n) out[n] = buf_[n].real() * scale;
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

 private:
  void check(std::size_t n) const {
    if (n != buf_.size()) throw Error(ErrorCode::shape_mismatch, "fft input has the wrong length");
  }

  std::size_t rows_, cols_;
  std::vector<Complex> buf_;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

// Transfer function of the kernel on a rows x cols grid: zero-pad, then
// shift circularly so the kernel centre (kr/2, kc/2) lands on the origin.
inline std::vector<Complex> psf_to_otf(const Psf& psf, std::size_t rows, std::size_t cols) {
  const Matrix& k = psf.kernel();
  if (k.rows() > rows || k.cols() > cols) {
    throw Error(ErrorCode::invalid_argument, "kernel larger than the image");
  }
  std::vector<double> padded(rows * cols, 0.0);
  const std::size_t cr = k.rows() / 2, cc = k.cols() / 2;
  for (std::size_t a = 0; a < k.rows(); ++a)
    for (std::size_t b = 0; b < k.cols(); ++b) {
      const std::size_t i = (a + rows - cr) % rows;
      const std::size_t j = (b + cols - cc) % cols;
      padded[i * cols + j] += k(a, b);
    }
  Fft2 fft(rows, cols);
  return fft.forward(padded);
}

// Per-band circular convolution with the kernel.
inline Tensor3 convolve(const Tensor3& t, const Psf& psf) {
  if (psf.kernel().size() == 1) return t;
  const auto otf = psf_to_otf(psf, t.rows(), t.cols());
  Fft2 fft(t.rows(), t.cols());
  Tensor3 out(t.dims());
  for (std::size_t k = 0; k < t.bands(); ++k) {
    auto spec = fft.forward(t.band(k));
    for (std::size_t n = 0; n < spec.size(); ++n) spec[n] *= otf[n];
    const auto img = fft.inverse_real(spec);
    std::copy(img.begin(), img.end(), out.band(k).begin());
  }
  return out;
}

// Per-band circular correlation with the kernel (the adjoint of convolve).
inline Tensor3 correlate(const Tensor3& t, const Psf& psf) {
  if (psf.kernel().size() == 1) return t;
  const auto otf = psf_to_otf(psf, t.rows(), t.cols());
  Fft2 fft(t.rows(), t.cols());
  Tensor3 out(t.dims());
  for (std::size_t k = 0; k < t.bands(); ++k) {
    auto spec = fft.forward(t.band(k));
    for (std::size_t n = 0; n < spec.size(); ++n) spec[n] *= std::conj(otf[n]);
    const auto img = fft.inverse_real(spec);
    std::copy(img.begin(), img.end(), out.band(k).begin());
  }
  return out;
}

}  // namespace wlrtr
