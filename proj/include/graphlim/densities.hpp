#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "graphlim/errors.hpp"
#include "graphlim/graph.hpp"
#include "graphlim/kernel.hpp"
#include "graphlim/norms.hpp"

namespace graphlim {

inline constexpr std::size_t kMaxPatternOrder = 8;
inline constexpr double kDensityCostLimit = 1e7;

namespace detail {

inline void check_density_cost(std::size_t t, std::size_t q) {
  const double cost = std::pow(static_cast<double>(t), static_cast<double>(q));
  if (cost > kDensityCostLimit)
    throw GuardError("D-13", "density cost limit exceeded: t^q = " + std::to_string(t) + "^" + std::to_string(q) +
                                 " > 1e7");
}

}  // namespace detail

/// Induced density: injective maps V(F) -> V(G) under which adjacency and
/// non-adjacency are both preserved, divided by n^q.
inline double induced_density_graph(const SimpleGraph& f, const SimpleGraph& g) {
  const std::size_t q = f.order(), n = g.order();
  if (q > kMaxPatternOrder)
    throw GuardError("D-13", "pattern too large: q=" + std::to_string(q) + " > " + std::to_string(kMaxPatternOrder));
  detail::require(q <= n, "pattern has more vertices than the host graph");
  std::vector<std::size_t> image(q);
  std::vector<char> used(n, 0);
  double count = 0.0;
  auto extend = [&](auto&& self, std::size_t i) -> void {
    if (i == q) {
      count += 1.0;
      return;
    }
    for (std::size_t v = 0; v < n; ++v) {
      if (used[v]) continue;
      bool ok = true;
      for (std::size_t j = 0; j < i && ok; ++j) ok = f.adjacent(i, j) == g.adjacent(v, image[j]);
      if (!ok) continue;
      used[v] = 1;
      image[i] = v;
      self(self, i + 1);
      used[v] = 0;
    }
  };
  extend(extend, 0);
  return count / std::pow(static_cast<double>(n), static_cast<double>(q));
}

/// t(F, W) for a step graphon: the sum over class assignments z of
/// prod lambda(z_i) prod_{ij in E} W(z_i,z_j) prod_{ij not in E} (1 - W(z_i,z_j)).
inline double density_step_graphon(const SimpleGraph& f, const StepGraphon& w) {
  const std::size_t q = f.order(), t = w.classes();
  detail::check_density_cost(t, q);
  std::vector<std::size_t> z(q);
  double total = 0.0;
  auto extend = [&](auto&& self, std::size_t i, double weight) -> void {
    if (i == q) {
      total += weight;
      return;
    }
    for (std::size_t c = 0; c < t; ++c) {
      double x = weight * w.measure(c);
      for (std::size_t j = 0; j < i && x != 0.0; ++j) {
        const double v = w.value(c, z[j]);
        x *= f.adjacent(i, j) ? v : 1.0 - v;
      }
      if (x == 0.0) continue;
      z[i] = c;
      self(self, i + 1, x);
    }
  };
  extend(extend, 0, 1.0);
  return total;
}

/// t(F, W) for a colored digraphon: each pair i < j contributes
/// W^(F(i,j), F(j,i))(z_i, z_j).
inline double density_colored(const ColoredDigraph& f, const ColoredDigraphon& w) {
  detail::require(f.colors() == w.k(), "pattern and digraphon use different color counts");
  const std::size_t q = f.order(), t = w.classes();
  detail::check_density_cost(t, q);
  std::vector<std::size_t> z(q);
  double total = 0.0;
  auto extend = [&](auto&& self, std::size_t i, double weight) -> void {
    if (i == q) {
      total += weight;
      return;
    }
    for (std::size_t c = 0; c < t; ++c) {
      double x = weight * w.measure(c);
      // Pair (j, i) with j < i: colors F(j,i) from j's side, F(i,j) from i's.
      for (std::size_t j = 0; j < i && x != 0.0; ++j) x *= w.value(f.color(j, i), f.color(i, j), z[j], c);
      if (x == 0.0) continue;
      z[i] = c;
      self(self, i + 1, x);
    }
  };
  extend(extend, 0, 1.0);
  return total;
}

struct CountingLemmaReport {
  double difference = 0.0;  ///< |t(F,W) - t(F,U)|
  double distance = 0.0;    ///< upper bound on the cut distance used for the bound
  double bound = 0.0;       ///< C(q,2) * distance
  bool holds = true;
};

/// Checks |t(F,W) - t(F,U)| <= C(q,2) d(U,W) with d the smaller of
/// ||U - W||_box and (for equal-measure classes) delta_hat(U,W). Both are
/// upper bounds on the cut distance, so the check is sound.
inline CountingLemmaReport counting_lemma_check(const SimpleGraph& f, const StepGraphon& u, const StepGraphon& w,
                                                const OverlayOptions& opts = {}) {
  CountingLemmaReport r;
  r.difference = std::abs(density_step_graphon(f, w) - density_step_graphon(f, u));
  const StepKernel diff = u.kernel() - w.kernel();
  const Mode inner = diff.classes() <= opts.cut.exact_limit ? Mode::exact : Mode::heuristic;
  r.distance = cut_norm(diff, inner, opts.cut).value;
  if (u.classes() == w.classes() && u.kernel().partition().equal_measures() &&
      w.kernel().partition().equal_measures() && std::abs(u.measure(0) - w.measure(0)) <= kMeasureTolerance)
    r.distance = std::min(r.distance, delta_hat(u.kernel(), w.kernel(), opts).value);
  const double q = static_cast<double>(f.order());
  r.bound = q * (q - 1.0) / 2.0 * r.distance;
  r.holds = r.difference <= r.bound + 1e-9;
  return r;
}

}  // namespace graphlim
