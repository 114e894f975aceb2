#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "graphlim/graph.hpp"
#include "graphlim/kernel.hpp"
#include "graphlim/parallel.hpp"
#include "graphlim/partition.hpp"
#include "graphlim/rng.hpp"

using namespace graphlim;

namespace {

SimpleGraph graph_from_mask(std::size_t n, std::uint64_t mask) {
  SimpleGraph g(n);
  std::size_t bit = 0;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v, ++bit)
      if ((mask >> bit) & 1U) g.add_edge(u, v);
  return g;
}

// Picks, per unordered pair, a color pair from M (edges) or from its complement.
ColoredDigraph random_coloring_of(const SimpleGraph& g, std::size_t k, std::size_t m, Rng& rng) {
  ColoredDigraph c(g.order(), k);
  for (std::size_t u = 0; u < g.order(); ++u)
    for (std::size_t v = u + 1; v < g.order(); ++v) {
      std::vector<std::pair<std::size_t, std::size_t>> options;
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
          if ((a < m || b < m) == g.adjacent(u, v)) options.emplace_back(a, b);
      const auto [a, b] = options[rng.below(options.size())];
      c.set_pair(u, v, a, b);
    }
  return c;
}

double edge_block_sum(const StepGraphon& w) { return w.kernel().integral(); }

}  // namespace

TEST(IntervalPartition, ValidatesMeasures) {
  EXPECT_NO_THROW(IntervalPartition({0.25, 0.75}));
  EXPECT_THROW(IntervalPartition({0.5, 0.6}), InvalidArgument);
  EXPECT_THROW(IntervalPartition({1.5, -0.5}), InvalidArgument);
  EXPECT_THROW(IntervalPartition(std::vector<double>{}), InvalidArgument);
  EXPECT_THROW(IntervalPartition({0.3, 0.7}, 4), InvalidArgument);
  const IntervalPartition aligned({0.25, 0.75}, 4);
  ASSERT_TRUE(aligned.alignment());
  EXPECT_EQ(aligned.units()[0], 1u);
  EXPECT_EQ(aligned.units()[1], 3u);
}

TEST(IntervalPartition, CanonicalHasEqualMeasures) {
  const auto p = IntervalPartition::canonical(5);
  EXPECT_EQ(p.size(), 5u);
  EXPECT_TRUE(p.equal_measures());
  EXPECT_DOUBLE_EQ(p.breakpoints().back(), 1.0);
}

TEST(CommonRefinement, TrivialPartitionIsNeutral) {
  const IntervalPartition p({0.2, 0.3, 0.5});
  const auto r = common_refinement(p, IntervalPartition::trivial());
  EXPECT_EQ(r.partition.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.partition.measure(i), p.measure(i), 1e-15);
  EXPECT_EQ(r.first, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(r.second, (std::vector<std::size_t>{0, 0, 0}));
}

TEST(CommonRefinement, TwoHalvings) {
  const auto r = common_refinement(IntervalPartition({0.5, 0.5}), IntervalPartition({0.25, 0.75}));
  ASSERT_EQ(r.partition.size(), 3u);
  EXPECT_NEAR(r.partition.measure(0), 0.25, 1e-15);
  EXPECT_NEAR(r.partition.measure(1), 0.25, 1e-15);
  EXPECT_NEAR(r.partition.measure(2), 0.5, 1e-15);
  EXPECT_EQ(r.first, (std::vector<std::size_t>{0, 0, 1}));
  EXPECT_EQ(r.second, (std::vector<std::size_t>{0, 1, 1}));
}

TEST(CommonRefinement, AlignedIsExactAndRejectsMixedAlignment) {
  const auto p = IntervalPartition::from_units({2, 3, 1}, 6);
  const auto q = IntervalPartition::from_units({1, 4, 1}, 6);
  const auto r = common_refinement(p, q);
  ASSERT_TRUE(r.partition.alignment());
  EXPECT_EQ(std::vector<std::size_t>(r.partition.units().begin(), r.partition.units().end()),
            (std::vector<std::size_t>{1, 1, 3, 1}));
  EXPECT_THROW(common_refinement(p, IntervalPartition::canonical(4)), InvalidArgument);
}

TEST(CommonRefinement, SkipsEmptyClasses) {
  const auto r = common_refinement(IntervalPartition({0.5, 0.0, 0.5}), IntervalPartition({1.0}));
  ASSERT_EQ(r.partition.size(), 2u);
  EXPECT_EQ(r.first, (std::vector<std::size_t>{0, 2}));
}

// Oracle: two ground elements share an output class iff they agree on every
// input partition and on membership in every split set.
TEST(CommonRefinement, GroupingsWithSplitsMatchBruteForce) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<std::size_t> lp(n), lq(n);
    for (auto& l : lp) l = rng.below(2);
    for (auto& l : lq) l = rng.below(2);
    const Partition p(lp, 2), q(lq, 2);
    SplitPair split;
    for (std::size_t a = 0; a < n; ++a) {
      if (rng.coin()) split.first.push_back(a);
      if (rng.coin()) split.second.push_back(a);
    }
    const std::vector<SplitPair> splits{split};
    const auto r = common_refinement(p, q, splits);
    EXPECT_LE(r.partition.classes(), 16u);
    EXPECT_TRUE(r.partition.refines(p));
    EXPECT_TRUE(r.partition.refines(q));
    std::set<std::size_t> s1(split.first.begin(), split.first.end()), s2(split.second.begin(), split.second.end());
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        const bool same = lp[a] == lp[b] && lq[a] == lq[b] && s1.count(a) == s1.count(b) && s2.count(a) == s2.count(b);
        EXPECT_EQ(same, r.partition.label(a) == r.partition.label(b));
      }
    for (std::size_t a = 0; a < n; ++a) {
      EXPECT_EQ(r.first[r.partition.label(a)], lp[a]);
      EXPECT_EQ(r.second[r.partition.label(a)], lq[a]);
    }
  }
}

TEST(Partition, CanonicalAndRefines) {
  const auto p = Partition::from_labels({2, 2, 0, 1});
  const auto c = p.canonical();
  EXPECT_EQ(std::vector<std::size_t>(c.labels().begin(), c.labels().end()), (std::vector<std::size_t>{0, 0, 1, 2}));
  EXPECT_TRUE(Partition::discrete(4).refines(p));
  EXPECT_FALSE(Partition::trivial(4).refines(p));
  EXPECT_EQ(Partition(std::vector<std::size_t>{0, 0}, 3).nonempty_classes(), 1u);
}

TEST(Partition, SetPartitionCountsAreStirlingNumbers) {
  // S(6,3) = 90, S(5,2) = 15, S(4,4) = 1
  for (auto [n, k, expected] : {std::tuple{6u, 3u, 90u}, {5u, 2u, 15u}, {4u, 4u, 1u}, {3u, 4u, 0u}}) {
    std::size_t count = 0;
    for_each_set_partition(n, k, [&](const Partition& p) {
      EXPECT_EQ(p.nonempty_classes(), k);
      ++count;
      return true;
    });
    EXPECT_EQ(count, expected);
  }
}

TEST(CoarseningMap, DetectsStraddling) {
  const auto fine = IntervalPartition({0.25, 0.25, 0.5});
  const auto map = coarsening_map(fine, IntervalPartition({0.5, 0.5}));
  EXPECT_EQ(std::vector<std::size_t>(map.labels().begin(), map.labels().end()), (std::vector<std::size_t>{0, 0, 1}));
  EXPECT_THROW(coarsening_map(IntervalPartition({0.3, 0.7}), IntervalPartition({0.5, 0.5})), InvalidArgument);
}

TEST(SimpleGraph, BasicOperations) {
  const auto c5 = SimpleGraph::cycle(5);
  EXPECT_EQ(c5.edge_count(), 5u);
  EXPECT_EQ(c5.complement().edge_count(), 5u);
  EXPECT_FALSE(c5.adjacent(0, 0));
  EXPECT_THROW(SimpleGraph(3).add_edge(1, 1), InvalidArgument);
  const std::vector<std::size_t> sub{0, 1, 2};
  EXPECT_EQ(c5.induced(sub), SimpleGraph::path(3));
}

TEST(GraphonOfGraph, Triangle) {
  const auto w = graphon_of_graph(SimpleGraph::complete(3));
  EXPECT_EQ(w.classes(), 3u);
  EXPECT_EQ(w.partition().alignment(), 3u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(w.value(i, j), i == j ? 0.0 : 1.0);
}

TEST(GraphonOfGraph, EmptyAndCycle) {
  const auto e = graphon_of_graph(SimpleGraph(2));
  EXPECT_EQ(e.values(), Matrix(2, 2));
  const auto c4 = graphon_of_graph(SimpleGraph::cycle(4));
  EXPECT_DOUBLE_EQ(edge_block_sum(c4), 0.5);  // 8 ordered adjacent pairs / 16
}

TEST(DigraphonOfColored, TwoVertices) {
  ColoredDigraph g(2, 2);
  g.set_pair(0, 1, 0, 1);
  const auto w = digraphon_of_colored(g);
  EXPECT_EQ(w.value(0, 1, 0, 1), 1.0);
  EXPECT_EQ(w.value(1, 0, 1, 0), 1.0);
  EXPECT_EQ(w.value(0, 0, 0, 1), 0.0);
  EXPECT_EQ(w.value(1, 1, 0, 0), 0.25);
}

TEST(DigraphonOfColored, MonochromaticMassInOneBlock) {
  const auto w = digraphon_of_colored(ColoredDigraph(3, 2, 0));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) {
        EXPECT_EQ(w.value(0, 0, i, j), 1.0);
      }
  const auto off = w.component(0, 0).integral() - 3 * 0.25 / 9.0;
  EXPECT_NEAR(off, 6.0 / 9.0, 1e-15);
}

TEST(DigraphonOfColored, DiagonalMeasureIsOneOverN) {
  Rng rng(11);
  for (std::size_t n : {1u, 3u, 7u}) {
    ColoredDigraph g(n, 3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) g.set_color(i, j, rng.below(3));
    const auto w = digraphon_of_colored(g);
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) diag += w.value(a, b, i, i) * w.measure(i) * w.measure(i);
    EXPECT_NEAR(diag, 1.0 / static_cast<double>(n), 1e-12);
  }
}

TEST(DigraphonOfColored, RandomInstancesSatisfyInvariants) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(6), k = 1 + rng.below(3);
    ColoredDigraph g(n, k);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) g.set_color(i, j, rng.below(k));
    const auto w = digraphon_of_colored(g);  // constructor validates
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < k; ++a)
          for (std::size_t b = 0; b < k; ++b) {
            s += w.value(a, b, i, j);
            EXPECT_EQ(w.value(a, b, i, j), w.value(b, a, j, i));
          }
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
  }
}

TEST(ColoredDigraphon, RejectsBrokenInvariants) {
  const auto p = IntervalPartition::trivial();
  EXPECT_THROW(ColoredDigraphon(2, p, std::vector<Matrix>(4, Matrix(1, 1, 0.3))), InvalidArgument);
  std::vector<Matrix> asym(4, Matrix(1, 1, 0.0));
  asym[1](0, 0) = 1.0;  // (0,1) without its mirror (1,0)
  EXPECT_THROW(ColoredDigraphon(2, p, asym), InvalidArgument);
}

TEST(KMColoring, ShadowRoundTripExhaustive) {
  Rng rng(5);
  for (std::size_t n = 1; n <= 6; ++n) {
    const std::uint64_t graphs = std::uint64_t{1} << (n * (n - 1) / 2);
    for (std::uint64_t mask = 0; mask < graphs; ++mask) {
      const auto g = graph_from_mask(n, mask);
      const KMColoring c(random_coloring_of(g, 3, 1, rng), 1, g);
      ASSERT_EQ(c.shadow_graph(), g);
    }
  }
}

TEST(KMColoring, RejectsWrongShadow) {
  ColoredDigraph c(2, 2, 1);  // every pair colored (1,1): no color below m = 1
  EXPECT_THROW(KMColoring(c, 1, SimpleGraph::complete(2)), InvalidArgument);
}

TEST(BlowUp, IdentityAndK2) {
  const auto c5 = SimpleGraph::cycle(5);
  EXPECT_EQ(blow_up(c5, 1), c5);
  const auto b = blow_up(SimpleGraph::complete(2), 2);
  EXPECT_EQ(b.edge_count(), 4u);
  for (std::size_t v = 0; v < 4; ++v) EXPECT_EQ(b.degree(v), 2u);
  EXPECT_FALSE(b.adjacent(0, 1));
  EXPECT_FALSE(b.adjacent(2, 3));
}

TEST(BlowUp, PreservesEdgeDensity) {
  const auto c5 = SimpleGraph::cycle(5);
  const auto b = blow_up(c5, 3);
  const double d1 = 2.0 * static_cast<double>(c5.edge_count()) / 25.0;
  const double d2 = 2.0 * static_cast<double>(b.edge_count()) / 225.0;
  EXPECT_DOUBLE_EQ(d1, d2);
}

TEST(BlowUp, GraphonsAgreeAfterMergingClasses) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(6), t = 1 + rng.below(4);
    const auto g = graph_from_mask(n, rng.next());
    const auto wg = graphon_of_graph(g);
    const auto wb = graphon_of_graph(blow_up(g, t));
    // Averages over the groups {u*t, ..., u*t + t-1} must reproduce W_G.
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) {
        double s = 0.0;
        for (std::size_t a = 0; a < t; ++a)
          for (std::size_t c = 0; c < t; ++c) s += wb.value(u * t + a, v * t + c);
        // Diagonal groups carry zero blocks on both sides.
        EXPECT_DOUBLE_EQ(s / static_cast<double>(t * t), wg.value(u, v));
      }
    const auto merged = wg.rebase(IntervalPartition::canonical(n * t));
    EXPECT_EQ(merged.values(), wb.values());
  }
}

TEST(StepKernel, RebasePermuteSubtract) {
  const StepKernel w(IntervalPartition({0.5, 0.5}), Matrix::from_rows({{1, 2}, {3, 4}}));
  const auto fine = w.rebase(IntervalPartition({0.25, 0.25, 0.5}));
  EXPECT_EQ(fine.values(), Matrix::from_rows({{1, 1, 2}, {1, 1, 2}, {3, 3, 4}}));
  const std::vector<std::size_t> swap{1, 0};
  EXPECT_EQ(w.permuted(swap).values(), Matrix::from_rows({{4, 3}, {2, 1}}));
  const auto u = StepKernel::constant(1.0, IntervalPartition({0.25, 0.75}));
  const auto d = w - u;
  EXPECT_EQ(d.classes(), 3u);
  EXPECT_NEAR(d.integral(), w.integral() - 1.0, 1e-15);
  EXPECT_THROW(StepKernel(IntervalPartition::trivial(), Matrix(2, 2)), InvalidArgument);
  EXPECT_THROW(StepKernel(IntervalPartition::trivial(), Matrix(1, 1, 2.0), 1.0), InvalidArgument);
}

TEST(StepGraphon, Validates) {
  EXPECT_THROW(StepGraphon(IntervalPartition({0.5, 0.5}), Matrix::from_rows({{0, 1}, {0, 0}})), InvalidArgument);
  EXPECT_THROW(StepGraphon::constant(1.5), InvalidArgument);
}

TEST(HypergraphAndPatterns, Basics) {
  Hypergraph3 h(4);
  h.add_edge(0, 1, 2);
  EXPECT_TRUE(h.adjacent(2, 0, 1));
  EXPECT_FALSE(h.adjacent(0, 1, 3));
  EXPECT_EQ(h.edge_count(), 1u);
  EXPECT_THROW(h.add_edge(0, 0, 1), InvalidArgument);
  const PatternPartition d(2, 2, 2, {1, 0, 0, 1});
  EXPECT_EQ(d.part_of(0, 1), 0u);
  EXPECT_EQ(d.part_of(1, 1), 1u);
  EXPECT_THROW(PatternPartition(2, 2, 2, {0, 1, 2, 0}), InvalidArgument);
  EXPECT_THROW(PatternPartition(2, 2, 2, {0, 1}), InvalidArgument);
  NodeKMColoring<SimpleGraph> nc{SimpleGraph::cycle(4), Partition({0, 1, 0, 1}, 2), d, PatternPartition::single(2, 2, 2)};
  EXPECT_NO_THROW(nc.validate());
  nc.parts = Partition({0, 1, 2, 0}, 3);
  EXPECT_THROW(nc.validate(), InvalidArgument);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a(42, Stream::sample_graph, 3), b(42, Stream::sample_graph, 3), c(42, Stream::sample_graph, 4);
  const auto x = a.next();
  EXPECT_EQ(x, b.next());
  EXPECT_NE(x, c.next());
  EXPECT_NE(derive_seed(1, Stream::cut_norm), derive_seed(1, Stream::cut_p_norm));
}

TEST(Rng, SubsetIsSortedAndUniform) {
  Rng rng(1);
  std::vector<std::size_t> hits(6, 0);
  for (int i = 0; i < 60000; ++i) {
    const auto s = rng.subset(6, 2);
    ASSERT_EQ(s.size(), 2u);
    ASSERT_LT(s[0], s[1]);
    ++hits[s[0]];
    ++hits[s[1]];
  }
  for (auto h : hits) EXPECT_NEAR(static_cast<double>(h) / 120000.0, 1.0 / 6.0, 0.01);
}

TEST(Parallel, ResultsIndependentOfThreadCountAndErrorsPropagate) {
  std::vector<std::uint64_t> one(100), four(100);
  parallel_for(100, 1, [&](std::size_t i) { one[i] = Rng(9, Stream::generator, i).next(); });
  parallel_for(100, 4, [&](std::size_t i) { four[i] = Rng(9, Stream::generator, i).next(); });
  EXPECT_EQ(one, four);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
               std::runtime_error);
}
