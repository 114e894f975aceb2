#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphlim/densities.hpp"
#include "graphlim/errors.hpp"
#include "graphlim/format.hpp"
#include "graphlim/graph.hpp"
#include "graphlim/kernel.hpp"
#include "graphlim/parallel.hpp"
#include "graphlim/rng.hpp"

namespace graphlim {

/// One random sample together with the randomness that produced it.
template <class Result>
struct SampleDraw {
  std::uint64_t seed = 0;
  std::size_t q = 0;
  std::vector<std::size_t> vertices;  ///< chosen vertex subset (graph sources)
  std::vector<double> latent;         ///< the q uniforms X_i (graphon sources)
  Result result;
};

/// Class of [0,1] containing x.
inline std::size_t class_of(const IntervalPartition& p, double x) {
  const auto b = p.breakpoints();
  const auto it = std::upper_bound(b.begin() + 1, b.end() - 1, x);
  // upper_bound steps over null classes, whose breakpoints coincide.
  return static_cast<std::size_t>(it - (b.begin() + 1));
}

namespace detail {

template <class G>
SampleDraw<G> sample_induced(const G& g, std::size_t q, std::uint64_t seed, Stream stream) {
  if (q > g.order())
    throw InvalidArgument("sample size q=" + std::to_string(q) + " exceeds order n=" + std::to_string(g.order()));
  Rng rng(seed, stream);
  SampleDraw<G> d{seed, q, rng.subset(g.order(), q), {}, G(0, 1)};
  d.result = g.induced(d.vertices);
  return d;
}

}  // namespace detail

/// G(q, G): induced subgraph on a uniform q-subset, relabelled in increasing order.
inline SampleDraw<SimpleGraph> sample_graph(const SimpleGraph& g, std::size_t q, std::uint64_t seed) {
  if (q > g.order())
    throw InvalidArgument("sample size q=" + std::to_string(q) + " exceeds order n=" + std::to_string(g.order()));
  Rng rng(seed, Stream::sample_graph);
  SampleDraw<SimpleGraph> d;
  d.seed = seed;
  d.q = q;
  d.vertices = rng.subset(g.order(), q);
  d.result = g.induced(d.vertices);
  return d;
}

inline SampleDraw<ColoredDigraph> sample_graph(const ColoredDigraph& g, std::size_t q, std::uint64_t seed) {
  return detail::sample_induced(g, q, seed, Stream::sample_graph);
}

/// G(q, W): latent X_i uniform, and i ~ j iff Y_ij < W(X_i, X_j) for
/// independent uniforms Y_ij. (Reading the comparison the other way round
/// would give edge probability 1 - W.)
inline SampleDraw<SimpleGraph> sample_graphon(const StepGraphon& w, std::size_t q, std::uint64_t seed) {
  Rng rng(seed, Stream::sample_graphon);
  SampleDraw<SimpleGraph> d;
  d.seed = seed;
  d.q = q;
  d.latent.resize(q);
  std::vector<std::size_t> cls(q);
  for (std::size_t i = 0; i < q; ++i) {
    d.latent[i] = rng.uniform();
    cls[i] = class_of(w.kernel().partition(), d.latent[i]);
  }
  d.result = SimpleGraph(q);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = i + 1; j < q; ++j)
      if (rng.uniform() < w.value(cls[i], cls[j])) d.result.add_edge(i, j);
  return d;
}

/// G(q, W) for a colored digraphon: for every pair i < j a single uniform
/// picks (color(i,j), color(j,i)) = (a,b) with probability W^(a,b)(X_i, X_j).
/// The two directions are drawn jointly.
inline SampleDraw<ColoredDigraph> sample_graphon(const ColoredDigraphon& w, std::size_t q, std::uint64_t seed) {
  Rng rng(seed, Stream::sample_digraphon);
  const std::size_t k = w.k();
  SampleDraw<ColoredDigraph> d{seed, q, {}, std::vector<double>(q), ColoredDigraph(q, k)};
  std::vector<std::size_t> cls(q);
  for (std::size_t i = 0; i < q; ++i) {
    d.latent[i] = rng.uniform();
    cls[i] = class_of(w.partition(), d.latent[i]);
  }
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = i + 1; j < q; ++j) {
      const double u = rng.uniform();
      double acc = 0.0;
      std::size_t pick = k * k;
      std::size_t last_positive = 0;
      for (std::size_t ab = 0; ab < k * k; ++ab) {
        const double p = w.value(ab / k, ab % k, cls[i], cls[j]);
        if (p > 0.0) last_positive = ab;
        acc += p;
        if (u < acc) {
          pick = ab;
          break;
        }
      }
      if (pick == k * k) pick = last_positive;  // rounding left u above the total
      d.result.set_pair(i, j, pick / k, pick % k);
    }
  return d;
}

// ---------------------------------------------------------------------------
// concentration experiments

/// A real-valued graph parameter; `on_graphon` is optional and used for
/// graphon sources.
struct GraphParameter {
  std::string name;
  std::function<double(const SimpleGraph&)> on_graph;
  std::function<double(const StepGraphon&)> on_graphon;
};

/// t(F, .) as a parameter.
inline GraphParameter density_parameter(const SimpleGraph& f, std::string name) {
  return {std::move(name),
          [f](const SimpleGraph& g) { return g.order() < f.order() ? 0.0 : induced_density_graph(f, g); },
          [f](const StepGraphon& w) { return density_step_graphon(f, w); }};
}

inline GraphParameter constant_parameter(double c) {
  return {"constant", [c](const SimpleGraph&) { return c; }, [c](const StepGraphon&) { return c; }};
}

struct ConcentrationRow {
  std::size_t q = 0;
  double epsilon = 0.0;
  double failure_rate = 0.0;  ///< fraction of trials with |f(source) - f(sample)| > epsilon
  double mean_abs_dev = 0.0;
  double median_abs_dev = 0.0;
  double q90_abs_dev = 0.0;
  std::size_t trials = 0;
};

namespace detail {

inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Empirical deviation of f(sample) from `source_value` over a grid of sample
/// sizes. `sampler(q, seed)` returns a SimpleGraph; trial seeds are derived
/// from (seed, grid index, trial), so results do not depend on `threads`.
template <class Sampler>
std::vector<ConcentrationRow> concentration_experiment(double source_value, Sampler&& sampler,
                                                       const std::function<double(const SimpleGraph&)>& f,
                                                       std::span<const std::size_t> q_grid, std::size_t trials,
                                                       double epsilon, std::uint64_t seed, std::size_t threads = 1) {
  detail::require(trials >= 1, "need at least one trial");
  std::vector<ConcentrationRow> rows;
  for (std::size_t gi = 0; gi < q_grid.size(); ++gi) {
    std::vector<double> dev(trials);
    parallel_for(trials, threads, [&](std::size_t t) {
      const auto s = derive_seed(seed, Stream::concentration, gi * trials + t);
      dev[t] = std::abs(source_value - f(sampler(q_grid[gi], s)));
    });
    ConcentrationRow r;
    r.q = q_grid[gi];
    r.epsilon = epsilon;
    r.trials = trials;
    std::size_t fails = 0;
    for (double x : dev) {
      r.mean_abs_dev += x;
      if (x > epsilon) ++fails;
    }
    r.mean_abs_dev /= static_cast<double>(trials);
    r.failure_rate = static_cast<double>(fails) / static_cast<double>(trials);
    r.median_abs_dev = detail::quantile(dev, 0.5);
    r.q90_abs_dev = detail::quantile(dev, 0.9);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<ConcentrationRow> concentration_experiment(const SimpleGraph& g, const GraphParameter& f,
                                                              std::span<const std::size_t> q_grid,
                                                              std::size_t trials, double epsilon, std::uint64_t seed,
                                                              std::size_t threads = 1) {
  return concentration_experiment(
      f.on_graph(g), [&](std::size_t q, std::uint64_t s) { return sample_graph(g, q, s).result; }, f.on_graph,
      q_grid, trials, epsilon, seed, threads);
}

inline std::vector<ConcentrationRow> concentration_experiment(const StepGraphon& w, const GraphParameter& f,
                                                              std::span<const std::size_t> q_grid,
                                                              std::size_t trials, double epsilon, std::uint64_t seed,
                                                              std::size_t threads = 1) {
  detail::require(static_cast<bool>(f.on_graphon), "parameter " + f.name + " has no graphon evaluator");
  return concentration_experiment(
      f.on_graphon(w), [&](std::size_t q, std::uint64_t s) { return sample_graphon(w, q, s).result; }, f.on_graph,
      q_grid, trials, epsilon, seed, threads);
}

inline void write_csv(std::ostream& out, std::span<const ConcentrationRow> rows) {
  out << "q,epsilon,failure_rate,mean_abs_dev,median_abs_dev,q90_abs_dev,trials\n";
  for (const auto& r : rows)
    out << r.q << ',' << format_double(r.epsilon) << ',' << format_double(r.failure_rate) << ','
        << format_double(r.mean_abs_dev) << ',' << format_double(r.median_abs_dev) << ','
        << format_double(r.q90_abs_dev) << ',' << r.trials << '\n';
}

}  // namespace graphlim
