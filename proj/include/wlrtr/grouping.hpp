#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "wlrtr/error.hpp"
#include "wlrtr/parallel.hpp"
#include "wlrtr/shrinkage.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

struct Position {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const Position&) const = default;
};

struct GroupingConfig {
  std::size_t patch = 7;    // cubic side m
  std::size_t k = 140;      // similar cubics per key (key excluded)
  std::size_t window = 20;  // search radius around the key
  std::size_t stride = 4;   // key grid step

  void validate() const {
    if (patch == 0 || k == 0 || stride == 0 || patch > window) {
      throw Error(ErrorCode::invalid_argument, "grouping needs patch >= 1, k >= 1, stride >= 1, patch <= window");
    }
  }
};

// A key cubic, its matched cubics (key first) and the stacked
// m^2 x (k+1) x bands tensor.
struct CubicGroup {
  Position key_pos;
  std::vector<Position> member_pos;
  Tensor3 group;
};

inline Matrix band_mean_image(const Tensor3& t) {
  Matrix m(t.rows(), t.cols());
  const double inv = 1.0 / static_cast<double>(t.bands());
  for (std::size_t k = 0; k < t.bands(); ++k) {
    auto band = t.band(k);
    for (std::size_t n = 0; n < band.size(); ++n) m.data()[n] += band[n];
  }
  for (double& v : m.data()) v *= inv;
  return m;
}

inline double patch_ssd(const Matrix& img, Position a, Position b, std::size_t m) {
  double acc = 0.0;
  for (std::size_t di = 0; di < m; ++di) {
    const double* ra = &img.data()[(a.row + di) * img.cols() + a.col];
    const double* rb = &img.data()[(b.row + di) * img.cols() + b.col];
    for (std::size_t dj = 0; dj < m; ++dj) {
      const double d = ra[dj] - rb[dj];
      acc += d * d;
    }
  }
  return acc;
}

// Key first, then the k most similar patches in the window ranked by SSD on
// the band-mean image, ties by row-major index. Short candidate lists are
// repeated cyclically to reach k+1 entries.
inline std::vector<Position> match_similar(const Matrix& mean_img, Position key, const GroupingConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.patch;
  if (mean_img.rows() < m || mean_img.cols() < m || key.row + m > mean_img.rows() || key.col + m > mean_img.cols()) {
    throw Error(ErrorCode::out_of_bounds, "key patch is not inside the image");
  }
  const std::size_t max_row = mean_img.rows() - m;
  const std::size_t max_col = mean_img.cols() - m;
  const std::size_t r0 = key.row > cfg.window ? key.row - cfg.window : 0;
  const std::size_t c0 = key.col > cfg.window ? key.col - cfg.window : 0;
  const std::size_t r1 = std::min(max_row, key.row + cfg.window);
  const std::size_t c1 = std::min(max_col, key.col + cfg.window);

  struct Candidate {
    double dist;
    std::size_t linear;
    Position pos;
  };
  std::vector<Candidate> cands;
  cands.reserve((r1 - r0 + 1) * (c1 - c0 + 1));
  for (std::size_t r = r0; r <= r1; ++r)
    for (std::size_t c = c0; c <= c1; ++c) {
      if (r == key.row && c == key.col) continue;
      const Position p{r, c};
      cands.push_back({patch_ssd(mean_img, key, p, m), r * mean_img.cols() + c, p});
    }
  auto less = [](const Candidate& a, const Candidate& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.linear < b.linear);
  };
  const std::size_t take = std::min(cfg.k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(), less);

  std::vector<Position> ranked;
  ranked.reserve(take + 1);
  ranked.push_back(key);
  for (std::size_t n = 0; n < take; ++n) ranked.push_back(cands[n].pos);
  std::vector<Position> out;
  out.reserve(cfg.k + 1);
  for (std::size_t n = 0; n < cfg.k + 1; ++n) out.push_back(ranked[n % ranked.size()]);
  return out;
}

// Mode 1 runs over the m^2 offsets inside a cubic (row-major), mode 2 over
// members, mode 3 over bands.
inline CubicGroup build_group(const Tensor3& t, const std::vector<Position>& positions, std::size_t m) {
  if (positions.empty() || m == 0) throw Error(ErrorCode::invalid_argument, "need at least one position and m >= 1");
  for (const Position& p : positions) {
    if (p.row + m > t.rows() || p.col + m > t.cols()) {
      throw Error(ErrorCode::out_of_bounds, "cubic at (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                                                ") leaves the image");
    }
  }
  CubicGroup g{positions.front(), positions, Tensor3(m * m, positions.size(), t.bands())};
  for (std::size_t k = 0; k < t.bands(); ++k)
    for (std::size_t j = 0; j < positions.size(); ++j)
      for (std::size_t di = 0; di < m; ++di)
        for (std::size_t dj = 0; dj < m; ++dj)
          g.group(di * m + dj, j, k) = t(positions[j].row + di, positions[j].col + dj, k);
  return g;
}

// Key grid: every `stride` pixels plus the last valid row/column so the
// whole image is covered.
inline std::vector<Position> key_positions(std::size_t rows, std::size_t cols, const GroupingConfig& cfg) {
  cfg.validate();
  if (rows < cfg.patch || cols < cfg.patch) {
    throw Error(ErrorCode::invalid_argument, "image smaller than the patch size");
  }
  auto axis = [&](std::size_t extent) {
    std::vector<std::size_t> v;
    const std::size_t last = extent - cfg.patch;
    for (std::size_t x = 0; x <= last; x += cfg.stride) v.push_back(x);
    if (v.back() != last) v.push_back(last);
    return v;
  };
  std::vector<Position> keys;
  for (std::size_t r : axis(rows))
    for (std::size_t c : axis(cols)) keys.push_back({r, c});
  return keys;
}

// Running sums of every approximated cubic value and of the cover count per
// pixel, plus the squared norm of all approximations (for objectives).
class CoverAccumulator {
 public:
  CoverAccumulator(Dims dims, std::size_t patch)
      : dims_(dims), patch_(patch), sum_(dims), count_(dims.rows, dims.cols) {}

  void add(const std::vector<Position>& members, const Tensor3& approx) {
    const std::size_t m = patch_;
    if (approx.rows() != m * m || approx.cols() != members.size() || approx.bands() != dims_.bands) {
      throw Error(ErrorCode::shape_mismatch, "approximation does not match its group");
    }
    for (std::size_t j = 0; j < members.size(); ++j) {
      const Position p = members[j];
      for (std::size_t di = 0; di < m; ++di)
        for (std::size_t dj = 0; dj < m; ++dj) count_(p.row + di, p.col + dj) += 1.0;
      for (std::size_t k = 0; k < dims_.bands; ++k)
        for (std::size_t di = 0; di < m; ++di)
          for (std::size_t dj = 0; dj < m; ++dj) {
            const double v = approx(di * m + dj, j, k);
            sum_(p.row + di, p.col + dj, k) += v;
            approx_sq_ += v * v;
          }
    }
  }

  const Tensor3& sum() const noexcept { return sum_; }
  const Matrix& count() const noexcept { return count_; }
  double approx_sq() const noexcept { return approx_sq_; }
  std::size_t patch() const noexcept { return patch_; }
  const Dims& dims() const noexcept { return dims_; }

  // sum_i ||R_i x - L_i||^2 = sum_p count(p) x(p)^2 - 2 x(p) sum(p) + sum_i ||L_i||^2
  double residual_sq(const Tensor3& x) const {
    double acc = approx_sq_;
    for (std::size_t k = 0; k < dims_.bands; ++k)
      for (std::size_t i = 0; i < dims_.rows; ++i)
        for (std::size_t j = 0; j < dims_.cols; ++j) {
          const double v = x(i, j, k);
          acc += count_(i, j) * v * v - 2.0 * v * sum_(i, j, k);
        }
    return std::max(acc, 0.0);
  }

 private:
  Dims dims_;
  std::size_t patch_;
  Tensor3 sum_;
  Matrix count_;
  double approx_sq_ = 0.0;
};

// X(p) = (Y(p) + eta * sum(p)) / (1 + eta * count(p)); uncovered pixels keep Y.
inline Tensor3 blend_with_cover(const Tensor3& y, const CoverAccumulator& acc, double eta) {
  y.require_same(acc.sum());
  Tensor3 x(y.dims());
  for (std::size_t k = 0; k < y.bands(); ++k)
    for (std::size_t i = 0; i < y.rows(); ++i)
      for (std::size_t j = 0; j < y.cols(); ++j)
        x(i, j, k) = (y(i, j, k) + eta * acc.sum()(i, j, k)) / (1.0 + eta * acc.count()(i, j));
  return x;
}

inline Tensor3 aggregate(const std::vector<std::pair<CubicGroup, Tensor3>>& groups, Dims dims, const Tensor3& y,
                         double eta) {
  if (!(eta >= 0.0)) throw Error(ErrorCode::invalid_argument, "eta must be >= 0");
  if (y.dims() != dims) throw Error(ErrorCode::shape_mismatch, "y does not match target dims");
  const std::size_t m = groups.empty() ? 1 : static_cast<std::size_t>(std::llround(std::sqrt(
                                                   static_cast<double>(groups.front().first.group.rows()))));
  CoverAccumulator acc(dims, m);
  for (const auto& [g, approx] : groups) acc.add(g.member_pos, approx);
  return blend_with_cover(y, acc, eta);
}

struct GroupingPass {
  CoverAccumulator cover;
  double penalty = 0.0;  // sum over groups of the weighted l1 term
  std::size_t groups = 0;
};

// One prior step shared by every solver: match cubics on the band mean of
// `estimate`, approximate each group, accumulate. Groups are processed in
// fixed-size chunks and folded into the accumulator in key order, so the
// result does not depend on the thread count.
inline GroupingPass run_grouping_pass(const Tensor3& estimate, const GroupingConfig& cfg, GroupPrior prior,
                                      const ShrinkParams& shrink, unsigned threads) {
  const Matrix mean = band_mean_image(estimate);
  const auto keys = key_positions(estimate.rows(), estimate.cols(), cfg);
  GroupingPass pass{CoverAccumulator(estimate.dims(), cfg.patch), 0.0, keys.size()};
  const std::size_t chunk = 64;
  std::vector<std::vector<Position>> members(chunk);
  std::vector<GroupEstimate> results(chunk);
  for (std::size_t start = 0; start < keys.size(); start += chunk) {
    const std::size_t n = std::min(chunk, keys.size() - start);
    parallel_for(n, threads, [&](std::size_t i) {
      members[i] = match_similar(mean, keys[start + i], cfg);
      const CubicGroup g = build_group(estimate, members[i], cfg.patch);
      results[i] = approximate_group(g.group, prior, shrink);
    });
    for (std::size_t i = 0; i < n; ++i) {
      pass.cover.add(members[i], results[i].approx);
      pass.penalty += results[i].penalty;
    }
  }
  return pass;
}

}  // namespace wlrtr
