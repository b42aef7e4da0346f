#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <random>
#include <set>

#include "capacitylab/errors.hpp"
#include "capacitylab/format.hpp"
#include "capacitylab/parallel.hpp"
#include "capacitylab/point_set.hpp"
#include "capacitylab/space.hpp"

using namespace capacitylab;

namespace {

// Every leaf path by odometer counting, independent of leaf_path.
std::vector<NodePath> odometer(const std::vector<std::size_t>& arities) {
  std::vector<NodePath> out;
  NodePath cur(arities.size(), 0);
  for (;;) {
    out.push_back(cur);
    std::size_t i = arities.size();
    while (i > 0) {
      --i;
      if (++cur[i] < arities[i]) break;
      cur[i] = 0;
      if (i == 0) return out;
    }
  }
}

bool extends(const NodePath& longer, const NodePath& prefix) {
  return longer.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), longer.begin());
}

const std::vector<std::vector<std::size_t>> kSmallSpaces{{2}, {3}, {2, 2}, {3, 2}, {2, 3}, {2, 2, 2}, {1, 3}, {4}};

}  // namespace

TEST(PointSet, BasicOperations) {
  const std::vector<std::size_t> idx{0, 1, 3, 65};
  PointSet a = PointSet::from_indices(70, idx);
  EXPECT_EQ(a.count(), 4u);
  EXPECT_TRUE(a.contains(65));
  EXPECT_EQ(a.to_string(), "{0,1,3,65}");
  PointSet b(70);
  b.insert(1);
  b.insert(65);
  EXPECT_TRUE(b.is_subset_of(a));
  EXPECT_EQ((a - b).indices(), (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ((a & b), b);
  EXPECT_EQ((a | b), a);
  EXPECT_EQ(a.complement().count(), 66u);
  EXPECT_TRUE(PointSet(70).empty());
  EXPECT_THROW(a | PointSet(69), std::invalid_argument);
  EXPECT_THROW(a.to_mask(), std::logic_error);
}

TEST(PointSet, MaskRoundTrip) {
  for (std::uint64_t m = 0; m < 256; ++m) EXPECT_EQ(PointSet::from_mask(8, m).to_mask(), m);
  EXPECT_EQ(PointSet::full(5).to_mask(), 31u);
  EXPECT_EQ(PointSet::from_range(10, 2, 5).indices(), (std::vector<std::size_t>{2, 3, 4}));
}

TEST(Space, LeavesOfSmallSpaces) {
  ProductTreeSpace s2({2});
  EXPECT_EQ(leaves(s2), (std::vector<NodePath>{{0}, {1}}));
  ProductTreeSpace s22({2, 2});
  EXPECT_EQ(leaves(s22), (std::vector<NodePath>{{0, 0}, {0, 1}, {1, 0}, {1, 1}}));
  EXPECT_EQ(ProductTreeSpace({3}).leaf_count(), 3u);
}

TEST(Space, LeafOrderMatchesOdometer) {
  for (const auto& ar : kSmallSpaces) {
    ProductTreeSpace s(ar);
    const auto expected = odometer(ar);
    ASSERT_EQ(leaves(s), expected);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_EQ(s.leaf_path(i), expected[i]);
      EXPECT_EQ(s.leaf_index(expected[i]), i);
    }
  }
}

TEST(Space, RejectsBadArities) {
  EXPECT_THROW(ProductTreeSpace({}), std::invalid_argument);
  EXPECT_THROW(ProductTreeSpace({2, 0}), std::invalid_argument);
  EXPECT_THROW(ProductTreeSpace(std::vector<std::size_t>(21, 2)), std::invalid_argument);
}

TEST(Space, BasicOpenExamples) {
  ProductTreeSpace s({2, 2});
  EXPECT_EQ(basic_open(s, {}), PointSet::full(4));
  EXPECT_EQ(basic_open(s, {0}).indices(), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(basic_open(s, {1, 0}).indices(), (std::vector<std::size_t>{2}));
  EXPECT_THROW(basic_open(s, {2}), InvalidPath);
  EXPECT_THROW(basic_open(s, {0, 0, 0}), InvalidPath);
}

TEST(Space, BasicOpenIsPrefixExtension) {
  for (const auto& ar : kSmallSpaces) {
    ProductTreeSpace s(ar);
    const auto all = leaves(s);
    for (std::size_t len = 0; len <= s.depth(); ++len)
      for (std::size_t r = 0; r < s.nodes_at_length(len); ++r) {
        const NodePath t = s.node_at(len, r);
        EXPECT_EQ(s.node_rank(t), r);
        PointSet expected(s.leaf_count());
        for (std::size_t i = 0; i < all.size(); ++i)
          if (extends(all[i], t)) expected.insert(i);
        EXPECT_EQ(basic_open(s, t), expected);
      }
  }
}

TEST(Space, CanonicalDecompositionExamples) {
  ProductTreeSpace s({2, 2});
  EXPECT_EQ(canonical_decomposition(s, PointSet::from_mask(4, 0b0011)), (std::vector<NodePath>{{0}}));
  EXPECT_EQ(canonical_decomposition(s, PointSet::from_mask(4, 0b1001)), (std::vector<NodePath>{{0, 0}, {1, 1}}));
  EXPECT_TRUE(canonical_decomposition(s, PointSet(4)).empty());
  EXPECT_EQ(canonical_decomposition(s, PointSet::full(4)), (std::vector<NodePath>{{}}));
}

// Antichain, exact re-union, and minimality (each member is maximal inside A)
// for every subset of every small space.
TEST(Space, CanonicalDecompositionExhaustive) {
  for (const auto& ar : kSmallSpaces) {
    ProductTreeSpace s(ar);
    const std::size_t n = s.leaf_count();
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
      const PointSet A = PointSet::from_mask(n, m);
      const auto dec = canonical_decomposition(s, A);
      for (std::size_t i = 0; i < dec.size(); ++i)
        for (std::size_t j = 0; j < dec.size(); ++j)
          if (i != j) {
            ASSERT_FALSE(extends(dec[i], dec[j]));
          }
      ASSERT_EQ(from_paths(s, dec), A);
      for (const auto& t : dec)
        if (!t.empty()) {
          NodePath parent(t.begin(), t.end() - 1);
          ASSERT_FALSE(basic_open(s, parent).is_subset_of(A));
        }
    }
  }
}

TEST(Space, CanonicalDecompositionReunionsOn64Leaves) {
  ProductTreeSpace s({2, 2, 2, 2, 2, 2});
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    PointSet A(64);
    const double density = (trial % 10) / 10.0;
    std::bernoulli_distribution coin(density);
    for (std::size_t i = 0; i < 64; ++i)
      if (coin(rng)) A.insert(i);
    ASSERT_EQ(from_paths(s, canonical_decomposition(s, A)), A);
  }
}

TEST(Space, DiameterExamples) {
  ProductTreeSpace s({2, 2, 2});
  EXPECT_EQ(diameter(s, TreeMetric{0.5}, {}), 1.0);
  EXPECT_EQ(diameter(s, TreeMetric{0.5}, {0, 1, 0}), 0.125);
  EXPECT_DOUBLE_EQ(diameter(ProductTreeSpace({3}), TreeMetric{1.0 / 3.0}, {2}), 1.0 / 3.0);
  EXPECT_THROW(TreeMetric{1.0}.validate(), std::invalid_argument);
  EXPECT_THROW(TreeMetric{0.0}.validate(), std::invalid_argument);
}

TEST(Space, UltrametricInequalityExhaustive) {
  for (const auto& ar : kSmallSpaces) {
    ProductTreeSpace s(ar);
    const TreeMetric metric{0.4};
    const std::size_t n = s.leaf_count();
    for (std::size_t x = 0; x < n; ++x) {
      EXPECT_EQ(metric.distance(s, x, x), 0.0);
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t z = 0; z < n; ++z)
          ASSERT_LE(metric.distance(s, x, z), std::max(metric.distance(s, x, y), metric.distance(s, y, z)));
    }
  }
}

TEST(Space, ParseRational) {
  EXPECT_EQ(parse_rational("1/2"), 0.5);
  EXPECT_EQ(parse_rational("3"), 3.0);
  EXPECT_EQ(parse_rational("0.25"), 0.25);
  EXPECT_THROW(parse_rational("1/0"), std::invalid_argument);
  EXPECT_THROW(parse_rational("abc"), std::invalid_argument);
}

TEST(Format, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5, 0.0}) EXPECT_EQ(std::stod(format_real(v)), v);
  EXPECT_EQ(format_real(0.5), "0.5");
  EXPECT_EQ(format_report_real(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(round_significant(0.1 + 0.2), 0.3);
}

TEST(Parallel, CoversEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, RethrowsSmallestFailingIndex) {
  try {
    parallel_for(100, [](std::size_t i) {
      if (i == 17 || i == 60) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "17");
  }
}

TEST(Parallel, ThreadCapFromEnvironment) {
  ::setenv("CAPACITYLAB_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  ::unsetenv("CAPACITYLAB_THREADS");
  EXPECT_GE(worker_count(), 1u);
}
