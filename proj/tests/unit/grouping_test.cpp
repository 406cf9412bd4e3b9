#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support/scenes.hpp"
#include "wlrtr/grouping.hpp"

using namespace wlrtr;
using wlrtr::testing::random_tensor;

namespace {

Matrix random_image(std::size_t r, std::size_t c, std::uint64_t seed) {
  return unfold(random_tensor({r, c, 1}, seed, 0.0, 10.0), 1);
}

}  // namespace

TEST(BandMean, Cases) {
  const Tensor3 one = random_tensor({4, 5, 1}, 1);
  EXPECT_EQ(band_mean_image(one).data(), one.data());

  Tensor3 pm(3, 3, 2);
  for (std::size_t n = 0; n < 9; ++n) {
    pm.data()[n] = 1.5 * n;
    pm.data()[9 + n] = -1.5 * n;
  }
  const Matrix zero = band_mean_image(pm);
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  const Matrix flat = band_mean_image(Tensor3(3, 4, 5, 7.0));
  for (double v : flat.data()) EXPECT_DOUBLE_EQ(v, 7.0);
}

TEST(Match, KeyFirstAndCount) {
  const Matrix img = random_image(30, 30, 2);
  const GroupingConfig cfg{.patch = 5, .k = 12, .window = 6, .stride = 4};
  const auto m = match_similar(img, {10, 11}, cfg);
  ASSERT_EQ(m.size(), 13u);
  EXPECT_EQ(m.front(), (Position{10, 11}));
  for (const Position& p : m) {
    EXPECT_LE(p.row + 5, 30u);
    EXPECT_LE(p.col + 5, 30u);
    EXPECT_LE(std::max(p.row, 10ul) - std::min(p.row, 10ul), 6u);
    EXPECT_LE(std::max(p.col, 11ul) - std::min(p.col, 11ul), 6u);
  }
}

TEST(Match, BruteForceRanking) {
  const Matrix img = random_image(20, 22, 3);
  const GroupingConfig cfg{.patch = 4, .k = 15, .window = 5, .stride = 2};
  const Position key{8, 9};
  std::vector<std::tuple<double, std::size_t, Position>> all;
  for (std::size_t r = 3; r <= 13; ++r)
    for (std::size_t c = 4; c <= 14; ++c) {
      if (r == key.row && c == key.col) continue;
      double d = 0.0;
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
          const double diff = img(key.row + a, key.col + b) - img(r + a, c + b);
          d += diff * diff;
        }
      all.emplace_back(d, r * 22 + c, Position{r, c});
    }
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    return std::get<0>(x) < std::get<0>(y) || (std::get<0>(x) == std::get<0>(y) && std::get<1>(x) < std::get<1>(y));
  });
  const auto m = match_similar(img, key, cfg);
  for (std::size_t n = 0; n < 15; ++n) EXPECT_EQ(m[n + 1], std::get<2>(all[n]));
}

TEST(Match, ConstantImageTieBreak) {
  const Matrix img(12, 12, 3.0);
  const GroupingConfig cfg{.patch = 3, .k = 5, .window = 3, .stride = 1};
  const auto m = match_similar(img, {4, 4}, cfg);
  const std::vector<Position> want{{4, 4}, {1, 1}, {1, 2}, {1, 3}, {1, 4}, {1, 5}};
  EXPECT_EQ(m, want);
}

TEST(Match, DuplicateRanksFirst) {
  Matrix img = random_image(30, 30, 4);
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < 5; ++b) img(15 + a, 15 + b) = img(10 + a, 10 + b);
  const auto m = match_similar(img, {10, 10}, {.patch = 5, .k = 10, .window = 8, .stride = 4});
  EXPECT_EQ(m[1], (Position{15, 15}));
}

TEST(Match, ShortCandidateListRepeats) {
  const Matrix img = random_image(6, 6, 5);
  const auto m = match_similar(img, {0, 0}, {.patch = 5, .k = 6, .window = 5, .stride = 1});
  // candidates: (0,1), (1,0), (1,1) plus the key -> 4 distinct, repeated cyclically
  ASSERT_EQ(m.size(), 7u);
  for (std::size_t n = 4; n < 7; ++n) EXPECT_EQ(m[n], m[n - 4]);
}

TEST(Match, KeyOutOfBounds) {
  EXPECT_THROW(match_similar(Matrix(10, 10), {7, 0}, {.patch = 5, .k = 3, .window = 5, .stride = 1}), Error);
  EXPECT_THROW((GroupingConfig{.patch = 8, .k = 3, .window = 5, .stride = 1}.validate()), Error);
}

TEST(BuildGroup, LayoutAndCases) {
  const Tensor3 t = random_tensor({10, 9, 3}, 6);
  const CubicGroup g = build_group(t, {{1, 2}, {4, 4}}, 3);
  ASSERT_EQ(g.group.dims(), (Dims{9, 2, 3}));
  EXPECT_EQ(g.group(1 * 3 + 2, 1, 2), t(5, 6, 2));
  EXPECT_EQ(g.key_pos, (Position{1, 2}));

  const CubicGroup px = build_group(t, {{3, 3}}, 1);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(px.group(0, 0, k), t(3, 3, k));

  const CubicGroup dup = build_group(t, {{2, 2}, {2, 2}}, 4);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t r = 0; r < 16; ++r) EXPECT_EQ(dup.group(r, 0, k), dup.group(r, 1, k));

  EXPECT_THROW(build_group(t, {{8, 0}}, 3), Error);
}

TEST(KeyGrid, CoversImage) {
  const GroupingConfig cfg{.patch = 7, .k = 10, .window = 10, .stride = 4};
  const auto keys = key_positions(30, 25, cfg);
  Matrix covered(30, 25);
  for (const Position& p : keys)
    for (std::size_t a = 0; a < 7; ++a)
      for (std::size_t b = 0; b < 7; ++b) covered(p.row + a, p.col + b) = 1.0;
  for (double v : covered.data()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(keys.back(), (Position{23, 18}));
}

TEST(Aggregate, RoundTripSingleGroup) {
  const Tensor3 t = random_tensor({8, 8, 2}, 7);
  const CubicGroup g = build_group(t, {{2, 3}}, 4);
  const Tensor3 zero(t.dims());
  const Tensor3 x = aggregate({{g, g.group}}, t.dims(), zero, 1e9);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        const bool inside = i >= 2 && i < 6 && j >= 3 && j < 7;
        EXPECT_NEAR(x(i, j, k), inside ? t(i, j, k) : 0.0, 1e-6);
      }
}

TEST(Aggregate, ZeroGroupsAndFixedPoint) {
  const Tensor3 y = random_tensor({6, 6, 2}, 8);
  EXPECT_EQ(aggregate({}, y.dims(), y, 0.3), y);
  const CubicGroup a = build_group(y, {{0, 0}, {1, 1}}, 3);
  const CubicGroup b = build_group(y, {{2, 1}}, 3);
  const Tensor3 x = aggregate({{a, a.group}, {b, b.group}}, y.dims(), y, 0.7);
  for (std::size_t n = 0; n < y.size(); ++n) EXPECT_NEAR(x.data()[n], y.data()[n], 1e-12);
}

TEST(Aggregate, CountAndConvexity) {
  const Tensor3 y = random_tensor({9, 9, 2}, 9);
  const std::vector<Position> members{{0, 0}, {2, 3}, {4, 4}, {2, 3}};
  const CubicGroup g = build_group(y, members, 4);
  const Tensor3 approx = random_tensor(g.group.dims(), 10, 5.0, 6.0);
  CoverAccumulator acc(y.dims(), 4);
  acc.add(members, approx);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) {
      double brute = 0.0;
      for (const Position& p : members)
        if (i >= p.row && i < p.row + 4 && j >= p.col && j < p.col + 4) brute += 1.0;
      EXPECT_EQ(acc.count()(i, j), brute);
    }
  const Tensor3 x = blend_with_cover(y, acc, 0.5);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) {
        if (acc.count()(i, j) == 0.0) {
          EXPECT_EQ(x(i, j, k), y(i, j, k));
          continue;
        }
        EXPECT_GE(x(i, j, k), std::min(y(i, j, k), 5.0) - 1e-12);
        EXPECT_LE(x(i, j, k), std::max(y(i, j, k), 6.0) + 1e-12);
      }
}

TEST(Aggregate, ResidualExpansionMatchesDirectSum) {
  const Tensor3 y = random_tensor({10, 10, 3}, 11);
  const Tensor3 x = random_tensor({10, 10, 3}, 12);
  const std::vector<Position> members{{0, 0}, {3, 5}, {5, 2}};
  const CubicGroup g = build_group(y, members, 5);
  const Tensor3 approx = random_tensor(g.group.dims(), 13);
  CoverAccumulator acc(y.dims(), 5);
  acc.add(members, approx);
  const CubicGroup gx = build_group(x, members, 5);
  const double direct = fro_norm(gx.group - approx) * fro_norm(gx.group - approx);
  EXPECT_NEAR(acc.residual_sq(x), direct, 1e-9 * direct);
}

TEST(GroupingPass, IndependentOfThreadCount) {
  const Tensor3 t = wlrtr::testing::mixture_scene(32, 32, 4);
  const GroupingConfig cfg{.patch = 5, .k = 20, .window = 8, .stride = 3};
  const ShrinkParams p{16.0, 1e-6, 10.0};
  const GroupingPass a = run_grouping_pass(t, cfg, GroupPrior::tensor_weighted, p, 1);
  const GroupingPass b = run_grouping_pass(t, cfg, GroupPrior::tensor_weighted, p, 4);
  EXPECT_EQ(a.cover.sum(), b.cover.sum());
  EXPECT_EQ(a.cover.count(), b.cover.count());
  EXPECT_EQ(a.penalty, b.penalty);
}
