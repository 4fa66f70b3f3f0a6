#include <gtest/gtest.h>

#include <cmath>

#include "action4d/detection.hpp"
#include "action4d/error.hpp"

using namespace action4d;

TEST(Envelope, EmptyGridIsZero) {
  const HeightMap h = topdown_envelope(VoxelGrid(GridSpec::centered(0, 0, 1, {8, 8, 12})));
  for (double v : h.values) EXPECT_EQ(v, 0.0);
}

TEST(Envelope, SingleVoxel) {
  VoxelGrid g(GridSpec::centered(0, 0, 1, {8, 8, 12}));
  g.set(5, 5, 10);
  const HeightMap h = topdown_envelope(g);
  for (int m = 0; m < 8; ++m)
    for (int n = 0; n < 8; ++n) EXPECT_EQ(h.at(m, n), (m == 5 && n == 5) ? 10.0 : 0.0);
}

TEST(Smooth, SigmaZeroIsIdentity) {
  HeightMap h(5, 4);
  for (std::size_t i = 0; i < h.values.size(); ++i) h.values[i] = static_cast<double>(i * i % 7);
  EXPECT_EQ(smooth(h, 0.0).values, h.values);
}

TEST(Smooth, ConstantMapUnchanged) {
  const HeightMap h(9, 7, 3.25);
  for (double s : {0.5, 1.0, 2.0, 4.0})
    for (double v : smooth(h, s).values) EXPECT_NEAR(v, 3.25, 1e-12);
}

TEST(Smooth, ImpulseMatchesSampledGaussian) {
  HeightMap h(41, 41);
  h.at(20, 20) = 1.0;
  const double sigma = 2.0;
  const int r = 6;
  double norm = 0.0;
  for (int i = -r; i <= r; ++i) norm += std::exp(-0.5 * i * i / (sigma * sigma));
  const HeightMap out = smooth(h, sigma);
  double total = 0.0;
  for (int m = 0; m < 41; ++m)
    for (int n = 0; n < 41; ++n) {
      const int dm = m - 20, dn = n - 20;
      const double expected = (std::abs(dm) <= r && std::abs(dn) <= r)
                                  ? std::exp(-0.5 * (dm * dm + dn * dn) / (sigma * sigma)) / (norm * norm)
                                  : 0.0;
      EXPECT_NEAR(out.at(m, n), expected, 1e-12);
      total += out.at(m, n);
    }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Smooth, NegativeSigmaRejected) { EXPECT_THROW(smooth(HeightMap(2, 2), -1.0), ContractViolation); }

TEST(Nms, ConstantMapHasNoPeaks) { EXPECT_TRUE(detect_candidates(HeightMap(12, 12, 20.0), 4, 0.0).empty()); }

TEST(Nms, ClosePeaksKeepTheHigher) {
  HeightMap h(20, 20);
  h.at(5, 5) = 30.0;
  h.at(8, 5) = 25.0;
  const auto c = detect_candidates(h, 4, 0.0);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].m, 5);
  EXPECT_EQ(c[0].n, 5);
}

TEST(Nms, FarPeaksBothSurvive) {
  HeightMap h(30, 30);
  h.at(5, 5) = 30.0;
  h.at(15, 5) = 25.0;
  const auto c = detect_candidates(h, 4, 0.0);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].m, 5);
  EXPECT_EQ(c[1].m, 15);
  EXPECT_DOUBLE_EQ(c[1].peak_height, 25.0);
}

TEST(Nms, PlateauKeepsOneCell) {
  HeightMap h(20, 20);
  for (int m = 8; m <= 10; ++m)
    for (int n = 8; n <= 9; ++n) h.at(m, n) = 18.0;
  const auto c = detect_candidates(h, 3, 0.0);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].m, 8);
  EXPECT_EQ(c[0].n, 8);
}

TEST(Nms, MinHeight) {
  HeightMap h(20, 20);
  h.at(5, 5) = 15.9;
  EXPECT_TRUE(detect_candidates(h, 3, 16.0).empty());
  h.at(5, 5) = 16.0;
  EXPECT_EQ(detect_candidates(h, 3, 16.0).size(), 1u);
}

TEST(Nms, MatchesExhaustiveNeighbourhoodCheck) {
  std::uint32_t state = 12345;
  auto next = [&] { return (state = state * 1664525u + 1013904223u) >> 24; };
  for (int trial = 0; trial < 20; ++trial) {
    HeightMap h(25, 19);
    for (auto& v : h.values) v = static_cast<double>(next() % 12);
    const int r = 1 + trial % 4;
    const auto got = detect_candidates(h, r, 3.0);
    std::vector<std::pair<int, int>> expected;
    for (int m = 0; m < h.nx; ++m)
      for (int n = 0; n < h.ny; ++n) {
        const double v = h.at(m, n);
        bool wins = v >= 3.0, above = false;
        for (int a = m - r; a <= m + r && wins; ++a)
          for (int b = n - r; b <= n + r; ++b) {
            if ((a == m && b == n) || a < 0 || b < 0 || a >= h.nx || b >= h.ny) continue;
            const double q = h.at(a, b);
            if (q > v || (q == v && std::make_pair(a, b) < std::make_pair(m, n))) wins = false;
            if (q < v) above = true;
          }
        if (wins && above) expected.emplace_back(m, n);
      }
    ASSERT_EQ(got.size(), expected.size()) << trial;
    for (std::size_t i = 1; i < got.size(); ++i) EXPECT_GE(got[i - 1].peak_height, got[i].peak_height);
    for (const auto& c : got)
      EXPECT_NE(std::find(expected.begin(), expected.end(), std::make_pair(c.m, c.n)), expected.end());
  }
}
