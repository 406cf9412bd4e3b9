#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "wlrtr/error.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

struct SvdResult {
  Matrix u;                             // rows x r, orthonormal columns
  std::vector<double> singular_values;  // r values, non-increasing
  Matrix v;                             // cols x r, orthonormal columns
};

namespace detail {

// Flips column `c` of `u` (and of `other`, if given) so that the entry of
// largest magnitude in u's column is positive. Ties go to the lowest row.
inline void fix_column_sign(Matrix& u, std::size_t c, Matrix* other) {
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t r = 0; r < u.rows(); ++r) {
    const double mag = std::abs(u(r, c));
    if (mag > best_mag) {
      best_mag = mag;
      best = r;
    }
  }
  if (u(best, c) < 0.0) {
    for (std::size_t r = 0; r < u.rows(); ++r) u(r, c) = -u(r, c);
    if (other)
      for (std::size_t r = 0; r < other->rows(); ++r) (*other)(r, c) = -(*other)(r, c);
  }
}

// Orders columns by descending key; equal keys keep their original order.
inline std::vector<std::size_t> descending_order(const std::vector<double>& key) {
  std::vector<std::size_t> order(key.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return order;
}

inline Matrix permute_columns(const Matrix& m, const std::vector<std::size_t>& order) {
  Matrix out(m.rows(), order.size());
  for (std::size_t c = 0; c < order.size(); ++c)
    for (std::size_t r = 0; r < m.rows(); ++r) out(r, c) = m(r, order[c]);
  return out;
}

// Replaces column c of q (whose leading columns 0..c-1 are orthonormal) by a
// unit vector orthogonal to them, taken from the standard basis.
inline void complete_column(Matrix& q, std::size_t c) {
  const std::size_t n = q.rows();
  for (std::size_t e = 0; e < n; ++e) {
    std::vector<double> v(n, 0.0);
    v[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t p = 0; p < c; ++p) {
        double d = 0.0;
        for (std::size_t r = 0; r < n; ++r) d += q(r, p) * v[r];
        for (std::size_t r = 0; r < n; ++r) v[r] -= d * q(r, p);
      }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.5) {
      for (std::size_t r = 0; r < n; ++r) q(r, c) = v[r] / norm;
      return;
    }
  }
  throw Error(ErrorCode::convergence_failure, "could not complete orthonormal basis");
}

// One-sided (Hestenes) Jacobi on a tall-or-square matrix a (m >= n).
inline SvdResult hestenes_svd(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  constexpr double tol = 1e-12;
  constexpr int max_sweeps = 80;

  // Work column-major so that column pairs are contiguous.
  std::vector<std::vector<double>> w(n, std::vector<double>(m));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) w[c][r] = a(r, c);
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < n; ++c) v[c][c] = 1.0;

  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        const double* wp = w[p].data();
        const double* wq = w[q].data();
        for (std::size_t r = 0; r < m; ++r) {
          alpha += wp[r] * wp[r];
          beta += wq[r] * wq[r];
          gamma += wp[r] * wq[r];
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t r = 0; r < m; ++r) {
          const double x = w[p][r], y = w[q][r];
          w[p][r] = cs * x - sn * y;
          w[q][r] = sn * x + cs * y;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double x = v[p][r], y = v[q][r];
          v[p][r] = cs * x - sn * y;
          v[q][r] = sn * x + cs * y;
        }
      }
    }
  }
  if (!converged) throw Error(ErrorCode::convergence_failure, "one-sided Jacobi SVD did not converge");

  std::vector<double> sv(n);
  for (std::size_t c = 0; c < n; ++c) {
    double acc = 0.0;
    for (double x : w[c]) acc += x * x;
    sv[c] = std::sqrt(acc);
  }
  const auto order = descending_order(sv);
  const double smax = n > 0 ? sv[order[0]] : 0.0;
  const double negligible = smax * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(m, n));

  SvdResult out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.singular_values[c] = sv[src];
    for (std::size_t r = 0; r < n; ++r) out.v(r, c) = v[src][r];
    if (sv[src] > negligible && sv[src] > 0.0) {
      for (std::size_t r = 0; r < m; ++r) out.u(r, c) = w[src][r] / sv[src];
    } else {
      complete_column(out.u, c);
    }
  }
  for (std::size_t c = 0; c < n; ++c) fix_column_sign(out.u, c, &out.v);
  return out;
}

// Householder reduction of a symmetric matrix to tridiagonal form followed
// by implicit QL (the EISPACK tred2/tql2 pair). On return `vecs` holds the
// eigenvectors as columns and `vals` the eigenvalues, unsorted.
inline void symmetric_eigen(const Matrix& a, Matrix& vecs, std::vector<double>& vals) {
  const std::size_t n = a.rows();
  vecs = a;
  vals.assign(n, 0.0);
  std::vector<double> e(n, 0.0);
  auto& d = vals;
  auto& V = vecs;
  if (n == 1) {
    vals[0] = a(0, 0);
    V(0, 0) = 1.0;
    return;
  }

  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);
  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0, h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) V(k, j) -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (std::size_t k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;

  // Implicit QL on the tridiagonal (d, e).
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  double f = 0.0, tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m == n) m = n - 1;
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 100) throw Error(ErrorCode::convergence_failure, "tridiagonal QL did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;
        p = d[m];
        double c = 1.0, c2 = c, c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          for (std::size_t k = 0; k < n; ++k) {
            h = V(k, ii + 1);
            V(k, ii + 1) = s * V(k, ii) + c * h;
            V(k, ii) = c * V(k, ii) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace detail

// Thin SVD, m = u * diag(s) * v^T, by one-sided Jacobi. Left singular
// vectors are signed so their largest-magnitude entry is positive.
inline SvdResult matrix_svd(const Matrix& m) {
  if (!std::all_of(m.data().begin(), m.data().end(), [](double x) { return std::isfinite(x); })) {
    throw Error(ErrorCode::non_finite, "matrix_svd input has non-finite entries");
  }
  if (m.rows() >= m.cols()) return detail::hestenes_svd(m);
  SvdResult t = detail::hestenes_svd(m.transposed());
  SvdResult out{std::move(t.v), std::move(t.singular_values), std::move(t.u)};
  for (std::size_t c = 0; c < out.u.cols(); ++c) detail::fix_column_sign(out.u, c, &out.v);
  return out;
}

// Full square basis of left singular vectors of m (m.rows() x m.rows()),
// ordered by descending singular value. Computed from the eigenvectors of
// m m^T, which is much cheaper than a full SVD for the wide unfoldings that
// group tensors produce. A zero matrix yields the identity.
inline Matrix left_singular_basis(const Matrix& m, std::vector<double>* singular_values = nullptr) {
  const std::size_t n = m.rows();
  Matrix gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto ri = m.row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      auto rj = m.row(j);
      double acc = 0.0;
      for (std::size_t c = 0; c < m.cols(); ++c) acc += ri[c] * rj[c];
      gram(i, j) = acc;
      gram(j, i) = acc;
    }
  }
  Matrix vecs;
  std::vector<double> vals;
  detail::symmetric_eigen(gram, vecs, vals);
  const auto order = detail::descending_order(vals);
  Matrix u = detail::permute_columns(vecs, order);
  for (std::size_t c = 0; c < n; ++c) detail::fix_column_sign(u, c, nullptr);
  if (singular_values) {
    singular_values->resize(n);
    for (std::size_t c = 0; c < n; ++c) (*singular_values)[c] = std::sqrt(std::max(vals[order[c]], 0.0));
  }
  return u;
}

// Tucker factors with orthogonal square u1, u2, u3: t = core x1 u1 x2 u2 x3 u3.
struct HosvdFactors {
  Tensor3 core;
  Matrix u1, u2, u3;

  const Matrix& factor(int mode) const {
    check_mode(mode);
    return mode == 1 ? u1 : (mode == 2 ? u2 : u3);
  }
};

// Projects t onto the given bases: t x1 u1^T x2 u2^T x3 u3^T.
inline Tensor3 project_core(const Tensor3& t, const Matrix& u1, const Matrix& u2, const Matrix& u3) {
  return nmode_product(nmode_product(nmode_product(t, u1.transposed(), 1), u2.transposed(), 2), u3.transposed(), 3);
}

inline HosvdFactors hosvd(const Tensor3& t) {
  HosvdFactors f;
  f.u1 = left_singular_basis(unfold(t, 1));
  f.u2 = left_singular_basis(unfold(t, 2));
  f.u3 = left_singular_basis(unfold(t, 3));
  f.core = project_core(t, f.u1, f.u2, f.u3);
  return f;
}

inline Tensor3 reconstruct(const HosvdFactors& f) {
  const Dims& d = f.core.dims();
  if (f.u1.cols() != d.rows || f.u2.cols() != d.cols || f.u3.cols() != d.bands) {
    throw Error(ErrorCode::shape_mismatch, "factor matrices do not match core " + to_string(d));
  }
  return nmode_product(nmode_product(nmode_product(f.core, f.u1, 1), f.u2, 2), f.u3, 3);
}

}  // namespace wlrtr
