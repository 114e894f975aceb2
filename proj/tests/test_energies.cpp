#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "graphlim/energies.hpp"

using namespace graphlim;

namespace {

SimpleGraph cycle(std::size_t n) {
  SimpleGraph g(n);
  for (std::size_t i = 0; i < n; ++i) g.add_edge(i, (i + 1) % n);
  return g;
}

SimpleGraph random_graph(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(seed, Stream::generator);
  SimpleGraph g(n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.uniform() < p) g.add_edge(u, v);
  return g;
}

Matrix random_array(std::size_t n, std::uint64_t seed, bool symmetric = true) {
  Rng rng(seed, Stream::generator, 1);
  Matrix a(n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = symmetric ? u : 0; v < n; ++v) {
      a(u, v) = 2.0 * rng.uniform() - 1.0;
      if (symmetric) a(v, u) = a(u, v);
    }
  return a;
}

// Independent max-cut by direct subset enumeration.
std::size_t brute_maxcut(const SimpleGraph& g) {
  const std::size_t n = g.order();
  std::size_t best = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::size_t cut = 0;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v)
        if (g.adjacent(u, v) && ((mask >> u & 1) != (mask >> v & 1))) ++cut;
    best = std::max(best, cut);
  }
  return best;
}

}  // namespace

TEST(Energy, TwoVertexCut) {
  SimpleGraph g(2);
  g.add_edge(0, 1);
  const Partition t({0, 1}, 2);
  EXPECT_DOUBLE_EQ(energy_of_partition(adjacency_matrix(g), t, maxcut_coupling()), 0.5);
}

TEST(Energy, LayeredFormMatchesCoupling) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix a = random_array(7, seed, seed % 2 == 0);
    Rng rng(seed, Stream::generator, 2);
    Matrix j(3, 3);
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t y = 0; y < 3; ++y) j(x, y) = rng.uniform();
    std::vector<std::size_t> l(7);
    for (auto& x : l) x = rng.below(3);
    const Partition t(l, 3);
    EXPECT_NEAR(energy_of_partition(a, t, j), energy_of_partition(RArrayTuple::from_coupling(a, j), t), 1e-12);
  }
}

TEST(Energy, RankThreeLayered) {
  // G^z = 1 only for z = (0,0,0): energy = (|T_0|/n)^3.
  RArrayTuple g(3, 2, 4);
  for (auto& x : g.arrays[0]) x = 1.0;
  const Partition t({0, 1, 0, 0}, 2);
  EXPECT_NEAR(energy_of_partition(g, t), 27.0 / 64.0, 1e-15);
  const auto best = gse_exact(g);
  EXPECT_NEAR(best.value, 1.0, 1e-12);
  // Local moves agree with full evaluation.
  const auto loc = gse_local(g, {4, 3, 1});
  EXPECT_NEAR(loc.value, energy_of_partition(g, loc.partition), 1e-12);
}

TEST(GseExact, CycleFiveMaxCut) {
  const auto r = gse_exact(adjacency_matrix(cycle(5)), maxcut_coupling());
  EXPECT_NEAR(r.value, 2.0 * 4.0 / 25.0, 1e-12);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.partition.label(0), 0u);
}

TEST(GseExact, MatchesBruteForceMaxCut) {
  for (std::size_t n = 2; n <= 14; n += 3) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto g = random_graph(n, 0.5, seed * 31 + n);
      const auto r = gse_exact(adjacency_matrix(g), maxcut_coupling());
      EXPECT_NEAR(r.value, 2.0 * static_cast<double>(brute_maxcut(g)) / static_cast<double>(n * n), 1e-12)
          << "n=" << n;
    }
  }
}

TEST(GseExact, GridOracleTwoParts) {
  // For s = 2 the maximum over labellings is the maximum of every subset.
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t n = 8;
    const Matrix a = random_array(n, seed, false);
    Rng rng(seed, Stream::generator, 3);
    Matrix j(2, 2);
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t y = 0; y < 2; ++y) j(x, y) = 2.0 * rng.uniform() - 1.0;
    double best = -1e300;
    std::size_t arg = 0;
    for (std::size_t mask = 0; mask < 256; ++mask) {
      std::vector<std::size_t> l(n);
      for (std::size_t u = 0; u < n; ++u) l[u] = mask >> (n - 1 - u) & 1;  // node 0 most significant
      const double e = energy_of_partition(a, Partition(l, 2), j);
      if (e > best + 1e-12) {
        best = e;
        arg = mask;
      }
    }
    const auto r = gse_exact(a, j);
    EXPECT_NEAR(r.value, best, 1e-12);
    for (std::size_t u = 0; u < n; ++u) EXPECT_EQ(r.partition.label(u), arg >> (n - 1 - u) & 1);
  }
}

TEST(GseExact, Guard) {
  const Matrix a(30, 30, 1.0);
  Matrix j(2, 2);
  j(0, 1) = 1.0;  // not relabel-invariant: 2^30 labellings
  try {
    (void)gse_exact(a, j);
    FAIL() << "expected guard";
  } catch (const GuardError& e) {
    EXPECT_EQ(e.code(), "D-20");
  }
}

TEST(GseExact, PinnedSymmetryKeepsMaximum) {
  // With relabel-invariant J the pinned search equals the unpinned one.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix a = random_array(7, seed + 100);
    Matrix j(3, 3, 0.3);
    for (std::size_t x = 0; x < 3; ++x) j(x, x) = -0.2;
    const auto pinned = gse_exact(a, j);
    double best = -1e300;
    std::vector<std::size_t> l(7, 0);
    for (std::size_t code = 0; code < 2187; ++code) {
      std::size_t c = code;
      for (std::size_t u = 7; u-- > 0;) {
        l[u] = c % 3;
        c /= 3;
      }
      best = std::max(best, energy_of_partition(a, Partition(l, 3), j));
    }
    EXPECT_NEAR(pinned.value, best, 1e-12);
  }
}

TEST(GseLocal, CloseToExactOnSmallInstances) {
  std::size_t good = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 6 + seed % 7;
    const Matrix a = random_array(n, seed + 7);
    const Matrix j = maxcut_coupling();
    const double exact = gse_exact(a, j).value;
    const double local = gse_local(a, j, {16, seed, 1}).value;
    EXPECT_LE(local, exact + 1e-12);
    ++total;
    if (local >= exact - 1e-9 || local >= 0.9 * exact) ++good;
  }
  EXPECT_GE(good, total * 9 / 10);
}

TEST(GseLocal, MonotoneInRestarts) {
  const Matrix a = random_array(40, 3);
  const Matrix j = maxcut_coupling(3);
  double prev = -1e300;
  for (std::size_t r : {1, 2, 4, 8, 16, 32}) {
    const double v = gse_local(a, j, {r, 11, 1}).value;
    EXPECT_GE(v, prev - 1e-15);
    prev = v;
  }
}

TEST(GseLocal, ThreadInvariant) {
  const Matrix a = random_array(30, 5);
  const auto one = gse_local(a, maxcut_coupling(), {8, 2, 1});
  const auto four = gse_local(a, maxcut_coupling(), {8, 2, 4});
  EXPECT_EQ(one.value, four.value);
  EXPECT_TRUE(std::equal(one.partition.labels().begin(), one.partition.labels().end(),
                         four.partition.labels().begin()));
}

TEST(Fractional, ConstantKernelMaxCut) {
  // U = 1, J = max-cut: sup of 2 f (1 - f) is 1/2.
  const auto r = fractional_energy(StepKernel::constant(1.0), maxcut_coupling());
  EXPECT_NEAR(r.value, 0.5, 1e-9);
  EXPECT_NEAR(r.mass(0, 0) + r.mass(1, 0), 1.0, 1e-12);
}

TEST(Fractional, AtLeastIntegralOnClasses) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed, Stream::generator, 4);
    const std::size_t t = 2 + seed % 4;
    std::vector<double> lam(t);
    double s = 0.0;
    for (auto& x : lam) s += (x = 0.2 + rng.uniform());
    for (auto& x : lam) x /= s;
    Matrix v(t, t);
    for (std::size_t x = 0; x < t; ++x)
      for (std::size_t y = x; y < t; ++y) v(x, y) = v(y, x) = rng.uniform();
    const StepKernel u(IntervalPartition(lam), v);
    const Matrix j = maxcut_coupling(2 + seed % 2);
    const auto r = fractional_energy(u, j, {8, seed, 1});
    // Every class-constant integral labelling is a feasible fractional point.
    const auto integral = gse_exact(u.mass_matrix(), j);
    EXPECT_GE(r.value, integral.value * static_cast<double>(t * t) - 1e-12);
    // Column sums are the class measures.
    for (std::size_t x = 0; x < t; ++x) {
      double c = 0.0;
      for (std::size_t a = 0; a < j.rows(); ++a) {
        EXPECT_GE(r.mass(a, x), -1e-12);
        c += r.mass(a, x);
      }
      EXPECT_NEAR(c, lam[x], 1e-12);
    }
  }
}

TEST(Fractional, SimplexMaximizerMatchesGrid) {
  Rng rng(9, Stream::generator);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd q(3, 3);
    Eigen::VectorXd g(3);
    for (int a = 0; a < 3; ++a) {
      g(a) = 2.0 * rng.uniform() - 1.0;
      for (int b = 0; b < 3; ++b) q(a, b) = 2.0 * rng.uniform() - 1.0;
    }
    const auto p = detail::maximize_on_simplex(q, g, 1.0);
    Eigen::VectorXd pv(3);
    for (int a = 0; a < 3; ++a) pv(a) = p[static_cast<std::size_t>(a)];
    const double got = pv.dot(q * pv) + g.dot(pv);
    double grid = -1e300;
    const int steps = 200;
    for (int x = 0; x <= steps; ++x)
      for (int y = 0; x + y <= steps; ++y) {
        Eigen::VectorXd z(3);
        z << x / double(steps), y / double(steps), (steps - x - y) / double(steps);
        grid = std::max(grid, z.dot(q * z) + g.dot(z));
      }
    EXPECT_GE(got, grid - 1e-12);
  }
}

TEST(GseSampling, ConstantArrayHasNoDeviation) {
  const Matrix a(20, 20, 1.0);
  const Matrix j = maxcut_coupling();
  const double base = gse_exact(a, j).value;
  GseSamplingOptions o;
  o.q = 10;
  o.trials = 20;
  o.rho = 0.1;
  const auto ex = gse_sampling_experiment(a, j, base, o);
  // Max cut of K_n with loops counted: floor(n/2) ceil(n/2) * 2 / n^2 = 1/2 for even n.
  EXPECT_NEAR(base, 0.5, 1e-12);
  for (const auto& t : ex.trials) EXPECT_NEAR(t.deviation, 0.0, 1e-12);
  EXPECT_EQ(ex.exceedance_rate, 0.0);
}

TEST(GseSampling, ExceedanceShrinksWithQ) {
  const std::size_t n = 60;
  const Matrix a = random_array(n, 21);
  const Matrix j = maxcut_coupling();
  const double base = gse_local(a, j, {64, 1, 1}).value;
  GseSamplingOptions o;
  o.trials = 60;
  o.rho = 0.08;
  o.seed = 5;
  o.restarts = 16;
  o.q = 8;
  const auto small = gse_sampling_experiment(a, j, base, o);
  o.q = 16;
  const auto large = gse_sampling_experiment(a, j, base, o);
  EXPECT_GE(small.exceedance_rate, large.exceedance_rate);
  double ms = 0.0, ml = 0.0;
  for (const auto& t : small.trials) ms += t.deviation;
  for (const auto& t : large.trials) ml += t.deviation;
  EXPECT_GT(ms, ml);
}

TEST(GseSampling, ReproducibleAndCsv) {
  const Matrix a = random_array(16, 2);
  GseSamplingOptions o;
  o.q = 6;
  o.trials = 5;
  o.with_replacement = true;
  const auto x = gse_sampling_experiment(a, maxcut_coupling(), 0.1, o);
  o.threads = 3;
  const auto y = gse_sampling_experiment(a, maxcut_coupling(), 0.1, o);
  std::ostringstream sx, sy;
  write_csv(sx, x);
  write_csv(sy, y);
  EXPECT_EQ(sx.str(), sy.str());
  EXPECT_EQ(sx.str().substr(0, sx.str().find('\n')), "q,trial,sample_value,baseline,deviation,exceeds,mode");
}
