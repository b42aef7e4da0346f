#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "capacitylab/hausdorff.hpp"
#include "oracles.hpp"

using namespace capacitylab;
using namespace capacitylab::hausdorff;
using oracles::BruteForceCover;

namespace {

bool covers(const ProductTreeSpace& space, const CoverFamily& E, const PointSet& A) {
  PointSet u(space.leaf_count());
  for (const auto& t : E.opens) u = u | basic_open(space, t);
  return A.is_subset_of(u);
}

}  // namespace

TEST(Weight, Examples) {
  const TreeMetric half{0.5};
  EXPECT_EQ(weight(CoverFamily{{{}}, 2.7, 1.0}, half), 1.0);
  EXPECT_EQ(weight(CoverFamily{{{0}, {1}}, 1.0, 1.0}, half), 1.0);
  EXPECT_EQ(weight(CoverFamily{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}, 2.0, 1.0}, half), 0.25);
  EXPECT_EQ(weight(CoverFamily{{}, 1.0, 1.0}, half), 0.0);
}

TEST(Weight, OrderIndependent) {
  const TreeMetric m{0.3};
  const CoverFamily a{{{0, 1}, {1}, {2, 0, 1}}, 1.3, 1.0};
  const CoverFamily b{{{2, 0, 1}, {0, 1}, {1}}, 1.3, 1.0};
  EXPECT_EQ(weight(a, m), weight(b, m));
  EXPECT_NEAR(weight(a, m), std::pow(0.3, 2.6) + std::pow(0.3, 1.3) + std::pow(0.3, 3.9), 1e-15);
}

TEST(MinWeightCover, SingletonClosedForm) {
  for (double base : {0.5, 1.0 / 3.0, 0.2}) {
    const TreeMetric m{base};
    for (const auto& ar : std::vector<std::vector<std::size_t>>{{2, 2, 2}, {3, 3}, {2, 3, 2, 2}}) {
      const ProductTreeSpace space(ar);
      const double d = static_cast<double>(space.depth());
      for (double s : {0.5, 1.0, 1.7}) {
        const PointSet A = PointSet::from_indices(space.leaf_count(), std::vector<std::size_t>{space.leaf_count() - 1});
        const double delta = m.diameter_at_length(space.depth()) * 0.5;
        const auto r = min_weight_cover(space, m, A, s, delta);
        EXPECT_NEAR(r.value, std::pow(base, s * d), 1e-12);
        ASSERT_EQ(r.optimal_cover.opens.size(), 1u);
        EXPECT_EQ(r.optimal_cover.opens[0].size(), space.depth());
        // at delta = 1 the singleton still prefers its leaf
        EXPECT_NEAR(min_weight_cover(space, m, A, s, 1.0).value, std::pow(base, s * d), 1e-12);
      }
    }
  }
}

TEST(MinWeightCover, FullBinaryClosedForm) {
  const TreeMetric m{0.5};
  for (std::size_t d = 1; d <= 8; ++d) {
    const ProductTreeSpace space(std::vector<std::size_t>(d, 2));
    for (double s : {1.25, 2.0, 3.0}) {
      const auto r = min_weight_cover(space, m, PointSet::full(space.leaf_count()), s, 1.0);
      EXPECT_NEAR(r.value, std::pow(2.0, (1.0 - s) * static_cast<double>(d)), 1e-12);
      EXPECT_EQ(r.optimal_cover.opens.size(), space.leaf_count());
    }
    // s < 1: the root wins at delta = 1
    EXPECT_EQ(min_weight_cover(space, m, PointSet::full(space.leaf_count()), 0.5, 1.0).value, 1.0);
  }
}

TEST(MinWeightCover, EmptySet) {
  const ProductTreeSpace space({2, 2});
  const auto r = min_weight_cover(space, TreeMetric{0.5}, PointSet(4), 1.0, 0.5);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_TRUE(r.optimal_cover.opens.empty());
  for (const auto& p : premeasure_profile(space, TreeMetric{0.5}, PointSet(4), 1.0, {1.0, 0.5, 0.1}))
    EXPECT_EQ(p.value, 0.0);
}

TEST(MinWeightCover, MatchesBruteForceExhaustive) {
  const std::vector<std::vector<std::size_t>> spaces{{2, 2}, {3, 2}, {2, 2, 2}, {2, 3, 2}, {4, 4}, {2, 2, 2, 2}};
  for (const auto& ar : spaces) {
    const ProductTreeSpace space(ar);
    const std::size_t n = space.leaf_count();
    for (double base : {0.5, 0.35}) {
      const TreeMetric m{base};
      for (double s : {0.6, 1.0, 1.8})
        for (double delta : {1.0, m.diameter_at_length(1), m.diameter_at_length(2) * 1.01, 0.0}) {
          BruteForceCover brute(space, m, s, delta);
          // every subset up to 12 leaves, a stride through the 16-leaf ones
          const std::uint64_t stride = n <= 12 ? 1 : 61;
          for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); mask += stride) {
            const PointSet A = PointSet::from_mask(n, mask);
            const auto r = min_weight_cover(space, m, A, s, delta);
            ASSERT_TRUE(covers(space, r.optimal_cover, A));
            ASSERT_EQ(r.value, weight(r.optimal_cover, m));
            ASSERT_EQ(r.value, brute(A)) << A.to_string() << " s " << s << " delta " << delta;
            for (const auto& t : r.optimal_cover.opens) EXPECT_TRUE(admissible(space, m, t.size(), delta));
          }
        }
    }
  }
}

TEST(MinWeightCover, MatchesBruteForceOn64Leaves) {
  std::mt19937_64 rng(23);
  const std::vector<std::vector<std::size_t>> spaces{{2, 2, 2, 2, 2, 2}, {4, 4, 4}, {8, 8}, {2, 4, 2, 4}};
  for (const auto& ar : spaces) {
    const ProductTreeSpace space(ar);
    for (int trial = 0; trial < 40; ++trial) {
      const TreeMetric m{trial % 2 ? 0.5 : 0.3};
      const double s = 0.4 + 0.1 * (trial % 17);
      const double delta = m.diameter_at_length(static_cast<std::size_t>(trial) % space.depth());
      std::bernoulli_distribution coin(0.05 + 0.9 * (trial % 5) / 4.0);
      PointSet A(64);
      for (std::size_t i = 0; i < 64; ++i)
        if (coin(rng)) A.insert(i);
      BruteForceCover brute(space, m, s, delta);
      const auto r = min_weight_cover(space, m, A, s, delta);
      ASSERT_TRUE(covers(space, r.optimal_cover, A));
      ASSERT_EQ(r.value, weight(r.optimal_cover, m));
      EXPECT_EQ(r.value, brute(A)) << A.to_string();
    }
  }
}

TEST(MinWeightCover, MonotoneAndSubadditiveExhaustive) {
  const ProductTreeSpace space({2, 2, 2});
  const TreeMetric m{0.5};
  for (double s : {0.5, 1.0, 2.0})
    for (double delta : {1.0, 0.5, 0.25}) {
      std::vector<double> v(256);
      for (std::uint64_t a = 0; a < 256; ++a) v[a] = min_weight_cover(space, m, PointSet::from_mask(8, a), s, delta).value;
      for (std::uint64_t a = 0; a < 256; ++a)
        for (std::uint64_t b = 0; b < 256; ++b) {
          if ((a & b) == a) { EXPECT_LE(v[a], v[b]); }
          EXPECT_LE(v[a | b], v[a] + v[b] + 1e-12);
        }
    }
}

TEST(MinWeightCover, NonincreasingInS) {
  const ProductTreeSpace space({3, 2, 2});
  const TreeMetric m{0.4};
  for (std::uint64_t a = 0; a < 4096; a += 13) {
    const PointSet A = PointSet::from_mask(12, a);
    double prev = std::numeric_limits<double>::infinity();
    for (double s : {0.25, 0.5, 1.0, 1.5, 2.5, 4.0}) {
      const double v = min_weight_cover(space, m, A, s, 0.4).value;
      EXPECT_LE(v, prev + 1e-15);
      prev = v;
    }
  }
}

TEST(PremeasureProfile, NondecreasingAsDeltaShrinks) {
  const ProductTreeSpace space({2, 2, 2, 2, 2});
  const TreeMetric m{0.5};
  const std::vector<double> deltas{1.0, 0.5, 0.25, 0.125, 0.0625, 0.01};
  const auto full = premeasure_profile(space, m, PointSet::full(32), 0.5, deltas);
  // s < 1: root at delta 1, then forced covers of 2^j cells of diameter 2^-j
  EXPECT_EQ(full[0].value, 1.0);
  for (std::size_t j = 1; j < deltas.size(); ++j) {
    const double level = static_cast<double>(std::min<std::size_t>(j, 5));
    EXPECT_NEAR(full[j].value, std::pow(2.0, 0.5 * level), 1e-12);
    EXPECT_GE(full[j].value, full[j - 1].value);
  }
  const auto single = premeasure_profile(space, m, PointSet::from_indices(32, std::vector<std::size_t>{7}), 1.3, deltas);
  for (const auto& p : single) EXPECT_NEAR(p.value, std::pow(0.5, 1.3 * 5), 1e-12);
  EXPECT_THROW(premeasure_profile(space, m, PointSet::full(32), 1.0, {0.5, 0.5}), std::invalid_argument);
}

TEST(PremeasureProfile, CsvColumns) {
  const ProductTreeSpace space({2, 2});
  const TreeMetric m{0.5};
  const std::vector<double> deltas{1.0, 0.25};
  const auto profile = premeasure_profile(space, m, PointSet::full(4), 2.0, deltas);
  std::ostringstream out;
  write_profile_csv(out, deltas, profile);
  EXPECT_EQ(out.str(), "delta,value,cover_size\n1,0.25,4\n0.25,0.25,4\n");
}

TEST(MinWeightCover, RejectsBadInput) {
  const ProductTreeSpace space({2, 2});
  EXPECT_THROW(min_weight_cover(space, TreeMetric{0.5}, PointSet(4), 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(min_weight_cover(space, TreeMetric{0.5}, PointSet(5), 1.0, 1.0), std::invalid_argument);
}
