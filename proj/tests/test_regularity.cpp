#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "graphlim/regularity.hpp"

using namespace graphlim;

namespace {

StepKernel random_kernel(std::size_t t, std::uint64_t seed, bool symmetric = true, double lo = 0.0) {
  Rng rng(seed);
  std::vector<double> m(t);
  for (auto& x : m) x = 0.2 + rng.uniform();
  double s = 0.0;
  for (double x : m) s += x;
  for (auto& x : m) x /= s;
  m.back() = 1.0;
  for (std::size_t i = 0; i + 1 < t; ++i) m.back() -= m[i];
  Matrix v(t, t);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      if (symmetric && j < i) {
        v(i, j) = v(j, i);
        continue;
      }
      v(i, j) = lo + (1.0 - lo) * rng.uniform();
    }
  return StepKernel(IntervalPartition(m), v);
}

ColoredDigraph random_colored(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  ColoredDigraph g(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) g.set_pair(i, j, rng.below(k), rng.below(k));
  return g;
}

// Brute force: largest sum_ij |mass over (S cap Q_i) x (T cap Q_j)| over every
// labelling of the atoms by `classes` labels and every S, T.
double brute_cut_q(const Matrix& mass, std::size_t classes) {
  const std::size_t t = mass.rows();
  std::size_t labellings = 1;
  for (std::size_t i = 0; i < t; ++i) labellings *= classes;
  double best = 0.0;
  std::vector<std::size_t> label(t);
  for (std::size_t code = 0; code < labellings; ++code) {
    std::size_t x = code;
    for (auto& l : label) {
      l = x % classes;
      x /= classes;
    }
    for (std::size_t s = 0; s < (std::size_t{1} << t); ++s)
      for (std::size_t tm = 0; tm < (std::size_t{1} << t); ++tm) {
        std::vector<double> block(classes * classes, 0.0);
        for (std::size_t a = 0; a < t; ++a)
          for (std::size_t b = 0; b < t; ++b)
            if ((s >> a & 1) && (tm >> b & 1)) block[label[a] * classes + label[b]] += mass(a, b);
        double v = 0.0;
        for (double y : block) v += std::abs(y);
        best = std::max(best, v);
      }
  }
  return best;
}

}  // namespace

TEST(Average, IdempotentAndMassPreserving) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto w = random_kernel(6, seed, false, -1.0);
    const auto p = Partition({0, 1, 0, 2, 1, 2}, 3);
    const auto a = average(w, p);
    EXPECT_NEAR(a.integral(), w.integral(), 1e-12);
    EXPECT_LT(max_abs_diff(average(a, p).values(), a.values()), 1e-12);
    EXPECT_LE(l2_norm_squared(a), l2_norm_squared(w) + 1e-12);
    EXPECT_NEAR(detail::averaged_energy(w, p), l2_norm_squared(a), 1e-12);
    EXPECT_NEAR(l2_norm_squared(merge_classes(w, p)), l2_norm_squared(a), 1e-12);
  }
}

TEST(Average, IntervalPartitionMatchesGrouping) {
  const auto w = random_kernel(4, 3);
  const IntervalPartition coarse({w.measure(0) + w.measure(1), w.measure(2) + w.measure(3)});
  const auto a = average(w, coarse);
  const auto b = average(w, Partition({0, 0, 1, 1}, 2));
  EXPECT_LT(l1_norm(a - b), 1e-12);
}

TEST(Average, ColoredStaysOnSimplex) {
  const auto w = digraphon_of_colored(random_colored(6, 3, 5));
  const auto a = average(w, Partition({0, 0, 1, 1, 2, 2}, 3));
  EXPECT_EQ(a.k(), 3u);  // the constructor validates the simplex and mirror symmetry
  const auto b = average(w, IntervalPartition({0.5, 0.5}));
  EXPECT_EQ(b.partition().size(), 2u);
}

TEST(WeakRegularity, ConstantNeedsNoSteps) {
  RegularityConfig cfg;
  cfg.epsilon = 0.1;
  const auto r = weak_regularity(StepKernel::constant(0.7), cfg);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_EQ(r.classes(), 1u);
  EXPECT_TRUE(r.certified);
  EXPECT_NEAR(r.certified_residual, 0.0, 1e-12);
}

TEST(WeakRegularity, TwoBlockKernelIsRecovered) {
  const StepKernel w(IntervalPartition({0.5, 0.5}), Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}));
  RegularityConfig cfg;
  cfg.epsilon = 0.05;
  const auto r = weak_regularity(w, cfg);
  EXPECT_TRUE(r.certified);
  EXPECT_NEAR(r.certified_residual, 0.0, 1e-12);
  EXPECT_EQ(r.classes(), 2u);
}

TEST(WeakRegularity, PostconditionAndIncrements) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto w = random_kernel(9, seed, true, -1.0);
    RegularityConfig cfg;
    cfg.epsilon = 0.15;
    const auto r = weak_regularity(w, cfg);
    ASSERT_TRUE(r.certified) << r.note;
    EXPECT_LE(r.iterations, static_cast<std::size_t>(std::ceil(1.0 / (cfg.epsilon * cfg.epsilon))));
    EXPECT_TRUE(r.increments_ok);
    for (double d : r.increments()) EXPECT_GT(d, std::pow(cfg.epsilon * l2_norm(w), 2));
    // Independent check of the residual.
    const auto residual = cut_norm_exact(w - average(w, r.partition)).value;
    EXPECT_LE(residual, cfg.epsilon * l2_norm(w) + 1e-12);
  }
}

TEST(WeakRegularity, ColoredResidualSum) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto w = digraphon_of_colored(random_colored(7, 2, seed));
    RegularityConfig cfg;
    cfg.epsilon = 0.3;
    const auto r = weak_regularity_colored(w, cfg);
    ASSERT_TRUE(r.certified);
    double sum = 0.0;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) {
        const auto c = w.component(a, b);
        sum += cut_norm_exact(c - average(c, r.partition)).value;
      }
    EXPECT_NEAR(sum, r.certified_residual, 1e-9);
    EXPECT_LE(sum, cfg.epsilon + 1e-12);
    EXPECT_LE(r.iterations, static_cast<std::size_t>(std::ceil(16.0 / (cfg.epsilon * cfg.epsilon))));
  }
}

TEST(WeakRegularity, HeuristicModeRunsOnLargeInputs) {
  const auto w = random_kernel(40, 9, true);
  RegularityConfig cfg;
  cfg.epsilon = 0.2;
  cfg.oracle_mode = Mode::heuristic;
  const auto r = weak_regularity(w, cfg);
  EXPECT_TRUE(r.certified);
  EXPECT_FALSE(r.exhaustive);
}

TEST(WeakRegularity, ExactModeGuardsLargeInputs) {
  const auto w = random_kernel(25, 2, true, -1.0);
  RegularityConfig cfg;
  try {
    (void)weak_regularity(w, cfg);
    FAIL() << "expected a guard";
  } catch (const GuardError& e) {
    EXPECT_EQ(e.code(), "D-5");
  }
}

TEST(CutPRegularity, ConstantIsTrivial) {
  RegularityConfig cfg;
  cfg.epsilon = 0.1;
  cfg.m0 = 3;
  const auto r = cut_p_regularity(ColoredDigraphon::uniform(2), cfg);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_TRUE(r.certified);
  EXPECT_TRUE(r.exhaustive);
}

TEST(CutPRegularity, PrunedQSearchMatchesPlainScan) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto w = digraphon_of_colored(random_colored(6 + seed % 3, 2, seed));
    const auto comps = detail::components_of(w);
    const auto masses = detail::residual_masses(comps, Partition::trivial(w.classes()));
    for (std::size_t classes : {2u, 3u}) {
      Violation pruned;
      detail::exhaustive_q_search(masses, classes, {}, pruned);
      double top = -1.0, residual = 0.0;
      Partition first_q;
      std::size_t first_c = 0;
      for_each_set_partition(w.classes(), classes, [&](const Partition& q) {
        double sum = 0.0;
        for (std::size_t c = 0; c < masses.size(); ++c) {
          const double v = cut_p_norm_exact(masses[c], q).value;
          sum += v;
          if (v > top + kTieTolerance) {
            top = v;
            first_q = q;
            first_c = c;
          }
        }
        residual = std::max(residual, sum);
        return true;
      });
      EXPECT_NEAR(pruned.value, top, 1e-12);
      EXPECT_NEAR(pruned.residual, residual, 1e-12);
      EXPECT_EQ(pruned.component, first_c);
      EXPECT_TRUE(std::equal(pruned.Q.labels().begin(), pruned.Q.labels().end(), first_q.labels().begin()));
    }
  }
}

TEST(CutPRegularity, ExhaustivePostconditionAgainstBruteForce) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto w = digraphon_of_colored(random_colored(5, 2, seed));
    RegularityConfig cfg;
    cfg.epsilon = 0.5;
    cfg.m0 = 2;
    const auto r = cut_p_regularity(w, cfg);
    ASSERT_TRUE(r.certified);
    ASSERT_TRUE(r.exhaustive);
    const std::size_t c = std::max(r.classes(), cfg.m0);
    const std::size_t k = 2;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) {
        const auto comp = w.component(a, b);
        const auto mass = (comp - average(comp, r.partition)).mass_matrix();
        EXPECT_LE(brute_cut_q(mass, std::min<std::size_t>(c, 5)), cfg.epsilon / 4.0 + 1e-12);
      }
    EXPECT_TRUE(r.increments_ok);
    for (double d : r.increments()) EXPECT_GT(d, std::pow(cfg.epsilon, 2) / 16.0);
  }
}

TEST(CutPRegularity, FirstStepHasAtLeastM0Classes) {
  const StepKernel w(IntervalPartition({0.25, 0.25, 0.25, 0.25}),
                     Matrix::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}));
  RegularityConfig cfg;
  cfg.epsilon = 0.2;
  cfg.m0 = 3;
  const auto r = cut_p_regularity(w, cfg);
  ASSERT_TRUE(r.certified);
  EXPECT_GE(r.classes(), 3u);
  EXPECT_LE(r.certified_residual, cfg.epsilon);
}

TEST(CutPRegularity, LocalSearchOnLargerInputs) {
  const auto w = random_kernel(16, 4, true, -1.0);
  RegularityConfig cfg;
  cfg.epsilon = 0.5;
  cfg.m0 = 4;
  const auto r = cut_p_regularity(w, cfg);
  EXPECT_FALSE(r.exhaustive);
  EXPECT_TRUE(r.certified);
  EXPECT_TRUE(r.increments_ok);
}

TEST(CutPRegularity, EquipartitionClassesHaveEqualMeasure) {
  const auto w = random_kernel(5, 6, true);
  RegularityConfig cfg;
  cfg.epsilon = 0.4;
  cfg.m0 = 2;
  cfg.equipartition = true;
  cfg.granularity = 0.5;
  const auto r = cut_p_regularity(w, cfg);
  ASSERT_TRUE(r.certified);
  const auto m = r.class_measures();
  for (double x : m) EXPECT_NEAR(x, 1.0 / static_cast<double>(m.size()), 1e-9);
  EXPECT_GE(r.atoms.size(), m.size());
}

TEST(CutPRegularity, ClassCapGuard) {
  const auto w = random_kernel(8, 7, true, -1.0);
  RegularityConfig cfg;
  cfg.epsilon = 0.05;
  cfg.class_cap = 2;
  try {
    (void)cut_p_regularity(w, cfg);
    FAIL() << "expected a guard";
  } catch (const GuardError& e) {
    EXPECT_EQ(e.code(), "D-11");
  }
}

TEST(EquipartitionRound, Example) {
  const auto r = equipartition_round(IntervalPartition({0.3, 0.7}), 0.25);
  EXPECT_NEAR(r.partition.measure(0), 0.25, 1e-12);
  EXPECT_NEAR(r.partition.measure(1), 0.75, 1e-12);
  EXPECT_NEAR(r.total_symmetric_difference, 0.1, 1e-12);
}

TEST(EquipartitionRound, Infeasible) {
  EXPECT_THROW(equipartition_round(IntervalPartition({0.5, 0.5}), 0.3), InvalidArgument);
  EXPECT_THROW(equipartition_round(IntervalPartition({0.2, 0.3, 0.5}), 0.5), InvalidArgument);
}

TEST(EquipartitionRound, RandomBound) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 1 + rng.below(6);
    std::vector<double> m(t);
    double s = 0.0;
    for (auto& x : m) s += (x = 0.05 + rng.uniform());
    for (auto& x : m) x /= s;
    const double unit = 1.0 / static_cast<double>(t * (1 + rng.below(5)));
    const auto r = equipartition_round(IntervalPartition(m), unit);
    EXPECT_LE(r.total_symmetric_difference, static_cast<double>(t) * unit + 1e-12);
    for (std::size_t i = 0; i < t; ++i) {
      const double units = r.partition.measure(i) / unit;
      EXPECT_NEAR(units, std::round(units), 1e-9);
    }
  }
}

TEST(Claim4, RandomGroupings) {
  Rng rng(21);
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t t = 2 + rng.below(6);
    const auto w = random_kernel(t, 100 + trial, rng.coin(), -1.0);
    const std::size_t l = 1 + rng.below(3);
    std::vector<std::size_t> lp(t), ls(t);
    for (auto& x : lp) x = rng.below(l);
    for (std::size_t a = 0; a < t; ++a) ls[a] = rng.below(4) == 0 ? rng.below(l) : lp[a];
    const auto r = claim4_check(w, Partition(lp, l), Partition(ls, l));
    EXPECT_TRUE(r.holds) << r.l1_difference << " vs " << r.symmetric_difference;
    worst = std::max(worst, r.ratio);
  }
  EXPECT_LE(worst, 7.0);
}

TEST(Claim4, IntervalVersion) {
  const auto w = random_kernel(5, 8, true, -1.0);
  const auto p = IntervalPartition({0.3, 0.7});
  const auto rounded = equipartition_round(p, 0.25);
  const auto r = claim4_check(w, p, rounded.partition);
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.symmetric_difference, 0.1, 1e-12);
  EXPECT_THROW(claim4_check(StepKernel::constant(2.0), p, p), InvalidArgument);
}
