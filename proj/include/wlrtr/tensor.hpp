#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wlrtr/error.hpp"

namespace wlrtr {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorCode::shape_mismatch, "matrix data length does not match rows*cols");
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::shape_mismatch, "matrix product inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline Matrix operator-(Matrix a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorCode::shape_mismatch, "matrix difference");
  for (std::size_t n = 0; n < a.size(); ++n) a.data()[n] -= b.data()[n];
  return a;
}

struct Dims {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t bands = 0;

  std::size_t count() const noexcept { return rows * cols * bands; }
  std::size_t along(int mode) const {
    switch (mode) {
      case 1: return rows;
      case 2: return cols;
      case 3: return bands;
      default: throw Error(ErrorCode::invalid_argument, "mode must be 1, 2 or 3");
    }
  }
  bool operator==(const Dims&) const = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.rows) + "x" + std::to_string(d.cols) + "x" + std::to_string(d.bands);
}

// Dense 3-order tensor, rows x cols x bands, stored band-sequential: band
// outermost, row-major inside each band. Every image in the toolkit (clean,
// noisy, stripe component, multipliers) lives in one of these.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Dims dims, double fill = 0.0) : dims_(dims), data_(checked(dims), fill) {}
  Tensor3(std::size_t rows, std::size_t cols, std::size_t bands, double fill = 0.0)
      : Tensor3(Dims{rows, cols, bands}, fill) {}
  Tensor3(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != checked(dims)) {
      throw Error(ErrorCode::shape_mismatch, "tensor data length does not match " + to_string(dims));
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t rows() const noexcept { return dims_.rows; }
  std::size_t cols() const noexcept { return dims_.cols; }
  std::size_t bands() const noexcept { return dims_.bands; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t band_size() const noexcept { return dims_.rows * dims_.cols; }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(k * dims_.rows + i) * dims_.cols + j];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(k * dims_.rows + i) * dims_.cols + j];
  }

  std::span<double> band(std::size_t k) { return {data_.data() + k * band_size(), band_size()}; }
  std::span<const double> band(std::size_t k) const { return {data_.data() + k * band_size(), band_size()}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Tensor3& operator+=(const Tensor3& o) {
    require_same(o);
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
    return *this;
  }
  Tensor3& operator-=(const Tensor3& o) {
    require_same(o);
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= o.data_[n];
    return *this;
  }
  Tensor3& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  bool operator==(const Tensor3&) const = default;

  void require_same(const Tensor3& o) const {
    if (o.dims_ != dims_) {
      throw Error(ErrorCode::shape_mismatch, to_string(dims_) + " vs " + to_string(o.dims_));
    }
  }

 private:
  static std::size_t checked(const Dims& d) {
    if (d.rows == 0 || d.cols == 0 || d.bands == 0) {
      throw Error(ErrorCode::invalid_argument, "tensor dimensions must be positive, got " + to_string(d));
    }
    return d.count();
  }

  Dims dims_;
  std::vector<double> data_;
};

inline Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
inline Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
inline Tensor3 operator*(Tensor3 a, double s) { return a *= s; }
inline Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

inline void check_mode(int mode) {
  if (mode < 1 || mode > 3) throw Error(ErrorCode::invalid_argument, "mode must be 1, 2 or 3");
}

// Mode-n matricization. Columns are the mode-n fibers, enumerated with the
// lower remaining index varying fastest:
//   mode 1: (i, j + k*cols)   mode 2: (j, i + k*rows)   mode 3: (k, i + j*rows)
inline Matrix unfold(const Tensor3& t, int mode) {
  check_mode(mode);
  const auto [R, C, B] = t.dims();
  switch (mode) {
    case 1: {
      Matrix m(R, C * B);
      for (std::size_t k = 0; k < B; ++k)
        for (std::size_t i = 0; i < R; ++i)
          for (std::size_t j = 0; j < C; ++j) m(i, j + k * C) = t(i, j, k);
      return m;
    }
    case 2: {
      Matrix m(C, R * B);
      for (std::size_t k = 0; k < B; ++k)
        for (std::size_t i = 0; i < R; ++i)
          for (std::size_t j = 0; j < C; ++j) m(j, i + k * R) = t(i, j, k);
      return m;
    }
    default: {
      Matrix m(B, R * C);
      for (std::size_t k = 0; k < B; ++k)
        for (std::size_t i = 0; i < R; ++i)
          for (std::size_t j = 0; j < C; ++j) m(k, i + j * R) = t(i, j, k);
      return m;
    }
  }
}

inline Tensor3 fold(const Matrix& m, int mode, Dims dims) {
  check_mode(mode);
  const auto [R, C, B] = dims;
  if (m.rows() != dims.along(mode) || m.rows() * m.cols() != dims.count()) {
    throw Error(ErrorCode::shape_mismatch, "cannot fold " + std::to_string(m.rows()) + "x" +
                                               std::to_string(m.cols()) + " matrix in mode " +
                                               std::to_string(mode) + " to " + to_string(dims));
  }
  Tensor3 t(dims);
  for (std::size_t k = 0; k < B; ++k)
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) {
        switch (mode) {
          case 1: t(i, j, k) = m(i, j + k * C); break;
          case 2: t(i, j, k) = m(j, i + k * R); break;
          default: t(i, j, k) = m(k, i + j * R); break;
        }
      }
  return t;
}

// t x_mode M: every mode-n fiber f is replaced by M f.
inline Tensor3 nmode_product(const Tensor3& t, const Matrix& M, int mode) {
  check_mode(mode);
  const auto [R, C, B] = t.dims();
  if (M.cols() != t.dims().along(mode)) {
    throw Error(ErrorCode::shape_mismatch, "n-mode product: matrix has " + std::to_string(M.cols()) +
                                               " columns but mode " + std::to_string(mode) + " has size " +
                                               std::to_string(t.dims().along(mode)));
  }
  const std::size_t P = M.rows();
  switch (mode) {
    case 1: {
      Tensor3 out(P, C, B);
      for (std::size_t k = 0; k < B; ++k)
        for (std::size_t p = 0; p < P; ++p) {
          double* orow = &out(p, 0, k);
          for (std::size_t i = 0; i < R; ++i) {
            const double w = M(p, i);
            if (w == 0.0) continue;
            const double* trow = t.band(k).data() + i * C;
            for (std::size_t j = 0; j < C; ++j) orow[j] += w * trow[j];
          }
        }
      return out;
    }
    case 2: {
      Tensor3 out(R, P, B);
      for (std::size_t k = 0; k < B; ++k)
        for (std::size_t i = 0; i < R; ++i) {
          const double* trow = t.band(k).data() + i * C;
          double* orow = &out(i, 0, k);
          for (std::size_t q = 0; q < P; ++q) {
            auto mrow = M.row(q);
            double acc = 0.0;
            for (std::size_t j = 0; j < C; ++j) acc += mrow[j] * trow[j];
            orow[q] = acc;
          }
        }
      return out;
    }
    default: {
      Tensor3 out(R, C, P);
      const std::size_t plane = R * C;
      for (std::size_t p = 0; p < P; ++p) {
        auto dst = out.band(p);
        for (std::size_t k = 0; k < B; ++k) {
          const double w = M(p, k);
          if (w == 0.0) continue;
          auto src = t.band(k);
          for (std::size_t n = 0; n < plane; ++n) dst[n] += w * src[n];
        }
      }
      return out;
    }
  }
}

inline double fro_norm(const Tensor3& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v * v;
  return std::sqrt(acc);
}

inline double fro_norm(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v * v;
  return std::sqrt(acc);
}

inline double l1_norm(const Tensor3& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += std::abs(v);
  return acc;
}

// Sum over bands and columns of the l2 norm of each mode-1 (column) fiber.
inline double l211_norm(const Tensor3& t) {
  const auto [R, C, B] = t.dims();
  double total = 0.0;
  for (std::size_t k = 0; k < B; ++k)
    for (std::size_t j = 0; j < C; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < R; ++i) acc += t(i, j, k) * t(i, j, k);
      total += std::sqrt(acc);
    }
  return total;
}

inline double inner(const Tensor3& a, const Tensor3& b) {
  a.require_same(b);
  double acc = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) acc += a.data()[n] * b.data()[n];
  return acc;
}

}  // namespace wlrtr
