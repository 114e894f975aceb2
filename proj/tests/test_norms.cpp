#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graphlim/norms.hpp"

using namespace graphlim;

namespace {

// Brute force over every pair of class subsets.
double brute_cut_norm(const StepKernel& w) {
  const std::size_t t = w.classes();
  const Matrix m = w.mass_matrix();
  double best = 0.0;
  for (std::uint64_t s = 0; s < (1U << t); ++s)
    for (std::uint64_t u = 0; u < (1U << t); ++u) {
      double v = 0.0;
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j)
          if (((s >> i) & 1U) && ((u >> j) & 1U)) v += m(i, j);
      best = std::max(best, std::abs(v));
    }
  return best;
}

// Dual route: maximum over all sign patterns of the cut norm of W^A.
double brute_cut_p_norm(const StepKernel& w, const Partition& groups) {
  const std::size_t g = groups.classes();
  double best = 0.0;
  for (std::uint64_t a = 0; a < (std::uint64_t{1} << (g * g)); ++a) {
    SignPattern p{g, std::vector<int>(g * g)};
    for (std::size_t i = 0; i < g * g; ++i) p.entries[i] = ((a >> i) & 1U) ? -1 : 1;
    best = std::max(best, brute_cut_norm(apply_sign_pattern(w, groups, p)));
  }
  return best;
}

StepKernel random_kernel(Rng& rng, std::size_t t, bool equal = false, bool signs_only = false) {
  std::vector<double> meas(t);
  double total = 0.0;
  for (auto& m : meas) total += (m = equal ? 1.0 : 0.1 + rng.uniform());
  for (auto& m : meas) m /= total;
  meas.back() = 1.0 - std::accumulate(meas.begin(), meas.end() - 1, 0.0);
  Matrix v(t, t);
  for (auto& x : v.data()) x = signs_only ? (rng.coin() ? 1.0 : -1.0) : 2.0 * rng.uniform() - 1.0;
  if (equal) return StepKernel(IntervalPartition::canonical(t), std::move(v));
  return StepKernel(IntervalPartition(meas), std::move(v));
}

Partition random_grouping(Rng& rng, std::size_t t, std::size_t g) {
  std::vector<std::size_t> l(t);
  for (auto& x : l) x = rng.below(g);
  return Partition(l, g);
}

const StepKernel checker(IntervalPartition({0.5, 0.5}), Matrix::from_rows({{1, -1}, {-1, 1}}));

}  // namespace

TEST(CutNormExact, ConstantKernel) {
  const auto w = StepKernel::constant(-0.7, IntervalPartition({0.2, 0.3, 0.5}));
  const auto r = cut_norm_exact(w);
  EXPECT_NEAR(r.value, 0.7, 1e-12);
  EXPECT_EQ(r.witness.S, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(r.witness.T, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(CutNormExact, Checkerboard) {
  const auto r = cut_norm_exact(checker);
  EXPECT_NEAR(r.value, 0.25, 1e-15);
  EXPECT_EQ(r.witness.S, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.witness.T, (std::vector<std::size_t>{0}));
}

TEST(CutNormExact, GraphonOfK2) {
  const auto r = cut_norm_exact(graphon_of_graph(SimpleGraph::complete(2)).kernel());
  EXPECT_NEAR(r.value, 0.5, 1e-15);
  EXPECT_EQ(r.witness.S, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(r.witness.T, (std::vector<std::size_t>{0, 1}));
}

TEST(CutNormExact, MatchesBruteForceAndWitnessRecomputes) {
  Rng rng(1);
  for (int trial = 0; trial < 150; ++trial) {
    const auto w = random_kernel(rng, 1 + rng.below(8));
    const auto r = cut_norm_exact(w);
    EXPECT_NEAR(r.value, brute_cut_norm(w), 1e-12);
    EXPECT_NEAR(r.witness.value, cut_value(w.mass_matrix(), r.witness.S, r.witness.T), 1e-12);
    EXPECT_NEAR(cut_norm_exact(w.scaled(-1.0)).value, r.value, 1e-12);
  }
}

TEST(CutNormExact, ThreadCountDoesNotChangeResult) {
  Rng rng(2);
  const auto w = random_kernel(rng, 14);
  CutNormOptions one, four;
  four.threads = 4;
  const auto a = cut_norm_exact(w, one), b = cut_norm_exact(w, four);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.witness.S, b.witness.S);
  EXPECT_EQ(a.witness.T, b.witness.T);
}

TEST(CutNormExact, GuardNamesTheLimit) {
  const auto w = StepKernel::constant(1.0, IntervalPartition::canonical(25));
  try {
    cut_norm_exact(w);
    FAIL() << "expected a guard error";
  } catch (const GuardError& e) {
    EXPECT_EQ(e.code(), "D-5");
    EXPECT_NE(std::string(e.what()).find("exact-limit exceeded: t=25 > 20"), std::string::npos);
  }
}

TEST(CutNormHeuristic, ConstantAndCheckerboard) {
  CutNormOptions o;
  o.restarts = 1;
  EXPECT_NEAR(cut_norm_heuristic(StepKernel::constant(0.4, IntervalPartition({0.5, 0.5})), o).value, 0.4, 1e-15);
  o.restarts = 8;
  EXPECT_NEAR(cut_norm_heuristic(checker, o).value, 0.25, 1e-15);
}

TEST(CutNormHeuristic, LowerBoundAndAgreementRate) {
  Rng rng(3);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = random_kernel(rng, 10, false, true);
    CutNormOptions o;
    o.seed = static_cast<std::uint64_t>(trial);
    const double h = cut_norm_heuristic(w, o).value;
    const double e = cut_norm_exact(w).value;
    EXPECT_LE(h, e + 1e-9);
    agree += std::abs(h - e) <= 1e-9;
  }
  EXPECT_GE(agree, 180);
}

TEST(CutNormHeuristic, DeterministicGivenSeed) {
  Rng rng(4);
  const auto w = random_kernel(rng, 30);
  CutNormOptions o;
  o.seed = 17;
  const auto a = cut_norm_heuristic(w, o);
  o.threads = 3;
  const auto b = cut_norm_heuristic(w, o);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.witness.S, b.witness.S);
}

TEST(SpectralBound, DominatesCutNorm) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = random_kernel(rng, 1 + rng.below(9));
    EXPECT_GE(cut_norm_spectral_bound(w) + 1e-12, cut_norm_exact(w).value);
  }
}

TEST(Norms, L1L2) {
  const auto c = StepKernel::constant(-0.3, IntervalPartition({0.1, 0.9}));
  EXPECT_NEAR(l1_norm(c), 0.3, 1e-15);
  EXPECT_NEAR(l2_norm(c), 0.3, 1e-15);
  EXPECT_NEAR(l1_norm(checker), 1.0, 1e-15);
  EXPECT_NEAR(l2_norm(checker), 1.0, 1e-15);
}

TEST(CutPNorm, TrivialPartitionGivesCutNorm) {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const auto w = random_kernel(rng, 1 + rng.below(7));
    const auto r = cut_p_norm(w, IntervalPartition::trivial(), Mode::exact);
    EXPECT_NEAR(r.value, cut_norm_exact(w).value, 1e-12);
  }
}

TEST(CutPNorm, NonNegativeKernelGivesL1) {
  const StepKernel w(IntervalPartition({0.3, 0.7}), Matrix::from_rows({{0.2, 0.9}, {0.9, 0.0}}));
  const auto r = cut_p_norm(w, IntervalPartition({0.3, 0.7}), Mode::exact);
  EXPECT_NEAR(r.value, l1_norm(w), 1e-12);
}

TEST(CutPNorm, CheckerboardOnItsOwnPartition) {
  const auto r = cut_p_norm(checker, IntervalPartition({0.5, 0.5}), Mode::exact);
  EXPECT_NEAR(r.value, 1.0, 1e-15);
  EXPECT_EQ(r.pattern.entries, (std::vector<int>{1, -1, -1, 1}));
  EXPECT_NEAR(brute_cut_p_norm(checker, Partition::discrete(2)), 1.0, 1e-15);
}

TEST(CutPNorm, MatchesSignPatternOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t t = 1 + rng.below(6), g = 1 + rng.below(3);
    const auto w = random_kernel(rng, t);
    const auto groups = random_grouping(rng, t, g);
    const auto r = cut_p_norm(w, groups, Mode::exact);
    EXPECT_NEAR(r.value, brute_cut_p_norm(w, groups), 1e-12);
    EXPECT_NEAR(r.value, cut_p_value(w.mass_matrix(), groups, r.witness.S, r.witness.T), 1e-12);
    // The reported pattern attains the value as a cut of W^A.
    EXPECT_NEAR(cut_value(apply_sign_pattern(w, groups, r.pattern).mass_matrix(), r.witness.S, r.witness.T), r.value,
                1e-12);
  }
}

TEST(CutPNorm, ValueScanMatchesExact) {
  Rng rng(17);
  for (int trial = 0; trial < 80; ++trial) {
    const std::size_t t = 1 + rng.below(9), g = 1 + rng.below(4);
    const auto w = random_kernel(rng, t);
    const auto groups = random_grouping(rng, t, g);
    EXPECT_NEAR(detail::cut_p_value_scan(w.mass_matrix(), groups), cut_p_norm(w, groups, Mode::exact).value, 1e-12);
  }
}

TEST(CutPNorm, SandwichAndRefinementMonotone) {
  Rng rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t t = 2 + rng.below(6);
    const auto w = random_kernel(rng, t);
    const auto coarse = random_grouping(rng, t, 2);
    // Split each coarse class further by a random bit.
    std::vector<std::size_t> fine_labels(t);
    for (std::size_t a = 0; a < t; ++a) fine_labels[a] = coarse.label(a) * 2 + rng.below(2);
    const Partition fine(fine_labels, 4);
    const double vc = cut_p_norm(w, coarse, Mode::exact).value;
    const double vf = cut_p_norm(w, fine, Mode::exact).value;
    EXPECT_LE(cut_norm_exact(w).value, vc + 1e-9);
    EXPECT_LE(vc, vf + 1e-9);
    EXPECT_LE(vf, l1_norm(w) + 1e-9);
  }
}

TEST(CutPNorm, HeuristicIsLowerBound) {
  Rng rng(9);
  int agree = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t t = 2 + rng.below(8);
    const auto w = random_kernel(rng, t);
    const auto groups = random_grouping(rng, t, 3);
    CutNormOptions o;
    o.seed = static_cast<std::uint64_t>(trial);
    const double h = cut_p_norm(w, groups, Mode::heuristic, o).value;
    const double e = cut_p_norm(w, groups, Mode::exact).value;
    EXPECT_LE(h, e + 1e-9);
    agree += std::abs(h - e) <= 1e-9;
  }
  EXPECT_GE(agree, 40);
}

TEST(CutPNorm, RefinesKernelWhenNeeded) {
  const auto w = StepKernel::constant(1.0);
  const auto r = cut_p_norm(w, IntervalPartition({0.25, 0.75}), Mode::exact);
  EXPECT_NEAR(r.value, 1.0, 1e-15);
  EXPECT_EQ(r.atoms.size(), 2u);
}

TEST(CutPNorm, GuardOnPartitionSize) {
  const auto w = StepKernel::constant(1.0, IntervalPartition::canonical(6));
  EXPECT_THROW(cut_p_norm(w, Partition::discrete(6), Mode::exact), GuardError);
}

TEST(DeltaHat, RelabeledCopyIsZero) {
  const auto g = SimpleGraph::path(5);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  EXPECT_NEAR(delta_hat(g, g.relabeled(perm)).value, 0.0, 1e-15);
}

TEST(DeltaHat, K2VersusEmpty) { EXPECT_NEAR(delta_hat(SimpleGraph::complete(2), SimpleGraph(2)).value, 0.5, 1e-15); }

TEST(DeltaHat, C4VersusP4MatchesFullEnumeration) {
  const auto c4 = graphon_of_graph(SimpleGraph::cycle(4)).kernel();
  const auto p4 = graphon_of_graph(SimpleGraph::path(4)).kernel();
  std::vector<std::size_t> phi{0, 1, 2, 3};
  double best = 1e9;
  do {
    const StepKernel moved(c4.partition(), p4.permuted(phi).values());
    best = std::min(best, brute_cut_norm(c4 - moved));
  } while (std::next_permutation(phi.begin(), phi.end()));
  const auto r = delta_hat(SimpleGraph::cycle(4), SimpleGraph::path(4));
  EXPECT_NEAR(r.value, best, 1e-12);
  EXPECT_NEAR(r.value, 0.125, 1e-12);  // one extra edge: 2 ordered pairs / 16
}

TEST(DeltaHat, BlowUpsAndMismatch) {
  // K2 blown up twice against K_{2,2}
  EXPECT_NEAR(delta_hat(SimpleGraph::complete(2), blow_up(SimpleGraph::complete(2), 2), 2).value, 0.0, 1e-15);
  EXPECT_NEAR(delta_hat(SimpleGraph::complete(2), blow_up(SimpleGraph::complete(2), 2)).value, 0.0, 1e-15);
  EXPECT_THROW(delta_hat(SimpleGraph::complete(2), SimpleGraph(5), 2), InvalidArgument);
}

TEST(DeltaHat, TriangleInequality) {
  Rng rng(10);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.below(4);
    auto rg = [&] {
      SimpleGraph g(n);
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v)
          if (rng.coin()) g.add_edge(u, v);
      return g;
    };
    const auto a = rg(), b = rg(), c = rg();
    EXPECT_LE(delta_hat(a, c).value, delta_hat(a, b).value + delta_hat(b, c).value + 1e-9);
  }
}

TEST(DeltaHat, LocalSearchUpperBoundsExhaustive) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = random_kernel(rng, 6, true), g = random_kernel(rng, 6, true);
    OverlayOptions heur;
    heur.mode = Mode::heuristic;
    const auto h = delta_hat(f, g, heur);
    EXPECT_FALSE(h.exhaustive);
    EXPECT_GE(h.value + 1e-12, delta_hat(f, g).value);
  }
}

TEST(DDeviation, IdenticalIsZeroAndTrivialPartitionIsDeltaHat) {
  Rng rng(12);
  for (int trial = 0; trial < 15; ++trial) {
    const auto u = random_kernel(rng, 4, true), w = random_kernel(rng, 4, true);
    const auto self = d_deviation(w, w, IntervalPartition({0.5, 0.5}));
    EXPECT_NEAR(self.value, 0.0, 1e-15);
    EXPECT_EQ(self.permutation, (std::vector<std::size_t>{0, 1, 2, 3}));
    EXPECT_NEAR(d_deviation(u, w, IntervalPartition::trivial()).value, delta_hat(w, u).value, 1e-12);
  }
}

TEST(DDeviation, MatchesPermutationTimesSignPatternOracle) {
  Rng rng(13);
  for (int trial = 0; trial < 15; ++trial) {
    const auto u = random_kernel(rng, 3, true), w = random_kernel(rng, 3, true);
    const IntervalPartition p({1.0 / 3.0, 2.0 / 3.0});
    const auto r = d_deviation(u, w, p);
    // Oracle on the common refinement of the 3-class partition with P.
    const auto ref = common_refinement(w.partition(), p);
    const Partition groups(ref.second, 2);
    std::vector<std::size_t> phi{0, 1, 2};
    double best = 1e9;
    do {
      const StepKernel moved(w.partition(), u.permuted(phi).values());
      best = std::min(best, brute_cut_p_norm((moved - w).rebase(ref.partition), groups));
    } while (std::next_permutation(phi.begin(), phi.end()));
    EXPECT_NEAR(r.value, best, 1e-12);
    EXPECT_GE(r.value + 1e-9, delta_hat(w, u).value);
  }
}
