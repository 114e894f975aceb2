#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphlim/colorings.hpp"
#include "graphlim/energies.hpp"
#include "graphlim/errors.hpp"
#include "graphlim/format.hpp"
#include "graphlim/graph.hpp"
#include "graphlim/parallel.hpp"
#include "graphlim/rng.hpp"
#include "graphlim/sampling.hpp"

namespace graphlim {

/// Which colorings the maximum runs over.
enum class WitnessKind {
  edge_coloring,  ///< all (k,m)-colorings of G
  node_coloring,  ///< node-(k,m)-colorings: node partitions into k parts with fixed D, D'
};

enum class EvaluatorClass { density, energy, custom };

/// A bounded witness g; f(G) is the maximum of g over colorings of G.
struct WitnessParameter {
  std::string name;
  WitnessKind kind = WitnessKind::node_coloring;
  EvaluatorClass evaluator_class = EvaluatorClass::custom;
  std::size_t k = 2;
  std::size_t m = 1;
  std::size_t r = 2;

  /// g on a (k,m)-coloring (edge_coloring kind).
  std::function<double(const KMColoring&)> on_coloring;

  /// D and D' (node_coloring kind).
  PatternPartition edge_classes = PatternPartition::single(1, 2, 1);
  PatternPartition nonedge_classes = PatternPartition::single(1, 2, 1);
  /// g on the 2m graphs (G_1..G_m, G~_1..G~_m) of a node coloring.
  std::function<double(const std::vector<SimpleGraph>&)> on_node_coloring;
  /// Optional fast path: g of the node coloring by T equals the layered
  /// energy of layered(G) on T.
  std::function<RArrayTuple(const SimpleGraph&)> layered;

  /// Sample size guess, used only for default experiment grids.
  std::size_t sample_guess = 12;

  double evaluate(const SimpleGraph& g, const NodePartition& t) const {
    detail::require(kind == WitnessKind::node_coloring && static_cast<bool>(on_node_coloring),
                    "witness " + name + " has no node-coloring evaluator");
    return on_node_coloring(node_coloring(NodeKMColoring<SimpleGraph>{g, t, edge_classes, nonedge_classes}));
  }
};

inline double ordered_pair_density(const SimpleGraph& g) {
  const double n = static_cast<double>(g.order());
  return n == 0.0 ? 0.0 : 2.0 * static_cast<double>(g.edge_count()) / (n * n);
}

/// Max k-colorable subgraph density: D puts monochromatic pairs in one
/// class and the rest in the other; g is the ordered-pair density of the
/// bichromatic part. k = 2 is max-cut.
inline WitnessParameter max_colorable_witness(std::size_t k, std::string name) {
  detail::require(k >= 2, "need at least two colors");
  WitnessParameter w;
  w.name = std::move(name);
  w.kind = WitnessKind::node_coloring;
  w.evaluator_class = EvaluatorClass::energy;
  w.k = k;
  w.m = 2;
  std::vector<std::size_t> d(k * k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) d[a * k + b] = a == b ? 1 : 0;
  w.edge_classes = PatternPartition(k, 2, 2, d);
  w.nonedge_classes = PatternPartition(k, 2, 2, d);
  w.on_node_coloring = [](const std::vector<SimpleGraph>& gs) { return ordered_pair_density(gs[0]); };
  w.layered = [k](const SimpleGraph& g) { return RArrayTuple::from_coupling(adjacency_matrix(g), maxcut_coupling(k)); };
  w.sample_guess = 12;
  return w;
}

/// Density of ordered pairs (u,v) with color(u,v) = 0, over (2,1)-colorings.
inline WitnessParameter color0_density_witness() {
  WitnessParameter w;
  w.name = "color0";
  w.kind = WitnessKind::edge_coloring;
  w.evaluator_class = EvaluatorClass::density;
  w.k = 2;
  w.m = 1;
  w.on_coloring = [](const KMColoring& c) {
    const auto& b = c.base();
    const std::size_t n = b.order();
    if (n == 0) return 0.0;
    std::size_t count = 0;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v)
        if (u != v && b.color(u, v) == 0) ++count;
    return static_cast<double>(count) / static_cast<double>(n * n);
  };
  w.sample_guess = 8;
  return w;
}

/// Max directed cut over (2,1)-colorings: the pairs colored (0,1) form an
/// orientation u -> v, and g is the largest fraction n^-2 #{u in S, v not
/// in S} over vertex sets S.
inline WitnessParameter max_dicut_witness() {
  WitnessParameter w;
  w.name = "maxdicut";
  w.kind = WitnessKind::edge_coloring;
  w.evaluator_class = EvaluatorClass::custom;
  w.k = 2;
  w.m = 1;
  w.on_coloring = [](const KMColoring& c) {
    const auto& b = c.base();
    const std::size_t n = b.order();
    if (n == 0) return 0.0;
    detail::require(n <= 20, "max-dicut witness evaluates on at most 20 vertices");
    std::vector<std::pair<std::size_t, std::size_t>> arcs;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v)
        if (u != v && b.color(u, v) == 0 && b.color(v, u) == 1) arcs.emplace_back(u, v);
    std::size_t best = 0;
    for (std::size_t s = 0; s < (std::size_t{1} << n); ++s) {
      std::size_t cut = 0;
      for (auto [u, v] : arcs) cut += (s >> u & 1) && !(s >> v & 1);
      best = std::max(best, cut);
    }
    return static_cast<double>(best) / static_cast<double>(n * n);
  };
  w.sample_guess = 8;
  return w;
}

/// Built-in witnesses: maxcut, max3col, maxdicut, color0.
inline std::vector<WitnessParameter> builtin_witnesses() {
  return {max_colorable_witness(2, "maxcut"), max_colorable_witness(3, "max3col"), max_dicut_witness(),
          color0_density_witness()};
}

inline WitnessParameter find_witness(const std::string& name) {
  for (auto& w : builtin_witnesses())
    if (w.name == name) return w;
  throw InvalidArgument("unknown witness '" + name + "' (known: maxcut, max3col, maxdicut, color0)");
}

// ---------------------------------------------------------------------------
// values

struct NdColoringValue {
  double value = 0.0;
  std::optional<KMColoring> coloring;
};

/// f(G) = max g over all (k,m)-colorings of G; the first maximum in
/// enumeration order wins.
inline NdColoringValue nd_value_exact(const SimpleGraph& g, const WitnessParameter& w) {
  detail::require(w.kind == WitnessKind::edge_coloring && static_cast<bool>(w.on_coloring),
                  "witness " + w.name + " is not an edge-coloring witness");
  NdColoringValue best;
  best.value = -std::numeric_limits<double>::infinity();
  for_each_km_coloring(g, w.k, w.m, [&](const ColoredDigraph& c) {
    KMColoring kc(c, w.m);
    const double v = w.on_coloring(kc);
    if (v > best.value + 1e-12) {
      best.value = v;
      best.coloring = std::move(kc);
    }
    return true;
  });
  return best;
}

enum class SearchMode { exact, local };

struct WeakNdValue {
  double value = 0.0;
  NodePartition parts;
  std::size_t d_index = 0;  ///< which (D, D') pair attained the value
  bool exact = true;
};

namespace detail {

/// Full re-evaluation of a node witness; slow but fully general.
struct NodeWitnessObjective {
  const SimpleGraph& g;
  const WitnessParameter& w;

  std::size_t order() const { return g.order(); }
  std::size_t parts() const { return w.k; }
  double scale() const { return 1.0; }
  double total(std::span<const std::size_t> l) const {
    return w.evaluate(g, NodePartition(std::vector<std::size_t>(l.begin(), l.end()), w.k));
  }
  double contribution(std::span<const std::size_t> l, std::size_t) const { return total(l); }
  bool label_symmetric() const { return false; }
};

}  // namespace detail

/// f(G) = max g over node-(k,m)-colorings. Exact mode enumerates all k^n
/// node partitions (guarded at 1e7); local mode is node-move hill climbing
/// with restarts and gives a lower bound. With `d_list` the maximum also runs
/// over the listed (D, D') pairs.
inline WeakNdValue weak_nd_value(const SimpleGraph& g, const WitnessParameter& w, SearchMode mode,
                                 const EnergyOptions& opts = {},
                                 std::span<const std::pair<PatternPartition, PatternPartition>> d_list = {}) {
  detail::require(w.kind == WitnessKind::node_coloring, "witness " + w.name + " is not a node-coloring witness");
  auto run = [&](const auto& obj) {
    if (mode == SearchMode::exact && detail::exhaustive_cost(obj) > kEnergyEnumerationLimit)
      throw GuardError("D-22", "exact nd enumeration limit exceeded: " + std::to_string(w.k) + "^" +
                                   std::to_string(g.order()) + " node partitions > 1e7; use local mode");
    return mode == SearchMode::exact ? detail::exhaustive_energy(obj) : detail::local_energy(obj, opts);
  };
  WeakNdValue best;
  best.value = -std::numeric_limits<double>::infinity();
  if (d_list.empty()) {
    EnergyResult r;
    if (w.layered) {
      const RArrayTuple t = w.layered(g);
      r = run(detail::LayeredObjective{t});
    } else {
      r = run(detail::NodeWitnessObjective{g, w});
    }
    return {r.value, r.partition, 0, r.exact};
  }
  for (std::size_t i = 0; i < d_list.size(); ++i) {
    WitnessParameter wi = w;
    wi.edge_classes = d_list[i].first;
    wi.nonedge_classes = d_list[i].second;
    wi.layered = nullptr;
    const auto r = run(detail::NodeWitnessObjective{g, wi});
    if (r.value > best.value + 1e-12) best = {r.value, r.partition, i, r.exact};
  }
  return best;
}

struct NdValue {
  double value = 0.0;
  bool exact = true;
};

/// f(G) for either witness kind. Auto mode: exact when the enumeration fits.
inline NdValue nd_value(const SimpleGraph& g, const WitnessParameter& w, std::optional<SearchMode> mode = {},
                        const EnergyOptions& opts = {}) {
  if (w.kind == WitnessKind::edge_coloring) return {nd_value_exact(g, w).value, true};
  SearchMode m = SearchMode::exact;
  if (mode) {
    m = *mode;
  } else if (std::pow(static_cast<double>(w.k), static_cast<double>(g.order()) - (w.layered ? 1.0 : 0.0)) >
             kEnergyEnumerationLimit) {
    m = SearchMode::local;
  }
  const auto r = weak_nd_value(g, w, m, opts);
  return {r.value, r.exact};
}

// ---------------------------------------------------------------------------
// smoothed witness

struct SmoothedReport {
  double value = 0.0;     ///< g^e on the instance
  double direct = 0.0;    ///< g on the instance itself
  std::size_t patterns = 0;  ///< distinct (F, T) patterns with positive weight
};

/// g^e(G, P, D) = sum over (F, T) on q0 vertices of t((F,T), (G,P)) g(F,T,D),
/// where t is the probability that q0 independent uniform vertices of G
/// induce F (repeated vertices count as non-adjacent) with node classes T.
/// The weights sum to one.
inline SmoothedReport smoothed_g(const SimpleGraph& g, const NodePartition& p, const WitnessParameter& w,
                                 std::size_t q0) {
  detail::require(w.kind == WitnessKind::node_coloring, "smoothing needs a node-coloring witness");
  detail::require(p.size() == g.order() && p.classes() == w.k, "node partition does not match the witness");
  detail::require(q0 >= 1, "q0 must be positive");
  if (q0 > 4 || w.k > 2)
    throw GuardError("D-13", "smoothed witness limited to q0 <= 4 and k <= 2 (got q0=" + std::to_string(q0) +
                                 ", k=" + std::to_string(w.k) + ")");
  const std::size_t n = g.order();
  const double maps = std::pow(static_cast<double>(n), static_cast<double>(q0));
  if (maps > kDensityCostLimit)
    throw GuardError("D-13", "smoothed witness cost " + std::to_string(maps) + " > 1e7 vertex maps");
  SmoothedReport rep;
  rep.direct = w.evaluate(g, p);
  // Weight of each (F, T) pattern, keyed by edge bits then class bits.
  std::map<std::uint64_t, double> weight;
  std::vector<std::size_t> phi(q0, 0);
  const double unit = 1.0 / maps;
  for (;;) {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < q0; ++i)
      for (std::size_t j = i + 1; j < q0; ++j) key = key << 1 | (phi[i] != phi[j] && g.adjacent(phi[i], phi[j]));
    for (std::size_t i = 0; i < q0; ++i) key = key * w.k + p.label(phi[i]);
    weight[key] += unit;
    std::size_t pos = q0;
    while (pos > 0 && ++phi[pos - 1] == n) phi[--pos] = 0;
    if (pos == 0) break;
  }
  for (const auto& [key, wt] : weight) {
    std::uint64_t x = key;
    std::vector<std::size_t> t(q0);
    for (std::size_t i = q0; i-- > 0;) {
      t[i] = x % w.k;
      x /= w.k;
    }
    SimpleGraph f(q0);
    for (std::size_t i = q0; i-- > 0;)
      for (std::size_t j = q0; j-- > i + 1;) {
        if (x & 1) f.add_edge(i, j);
        x >>= 1;
      }
    rep.value += wt * w.evaluate(f, NodePartition(t, w.k));
  }
  rep.patterns = weight.size();
  return rep;
}

// ---------------------------------------------------------------------------
// testing experiment

struct NdTrialRecord {
  std::string witness;
  std::size_t q = 0;
  std::size_t trial = 0;
  double f_source = 0.0;
  double f_sample = 0.0;
  double deviation = 0.0;  ///< f_source - f_sample
  bool exact = true;       ///< both values exact; otherwise local-search lower bounds
};

struct NdSummaryRow {
  std::size_t q = 0;
  std::size_t trials = 0;
  double median_abs_dev = 0.0;
  double mean_abs_dev = 0.0;
  double one_sided_failure = 0.0;  ///< P(f_sample < f_source - epsilon)
  double two_sided_failure = 0.0;  ///< P(|f_source - f_sample| > epsilon)
};

struct NdExperiment {
  double f_source = 0.0;
  bool source_exact = true;
  double epsilon = 0.0;
  std::vector<NdTrialRecord> records;
  std::vector<NdSummaryRow> summary;
};

struct NdTestingOptions {
  std::size_t trials = 100;
  double epsilon = 0.1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t restarts = 32;
  std::optional<SearchMode> mode;  ///< unset: exact where it fits
};

/// Per trial: draw G(q, G), evaluate f on it and record f(G) - f(sample).
inline NdExperiment nd_testing_experiment(const SimpleGraph& g, const WitnessParameter& w,
                                          std::span<const std::size_t> q_grid, const NdTestingOptions& opts) {
  NdExperiment ex;
  ex.epsilon = opts.epsilon;
  const auto src = nd_value(g, w, opts.mode, EnergyOptions{opts.restarts, derive_seed(opts.seed, Stream::nd_local, 0),
                                                           opts.threads});
  ex.f_source = src.value;
  ex.source_exact = src.exact;
  for (std::size_t gi = 0; gi < q_grid.size(); ++gi) {
    const std::size_t q = q_grid[gi];
    std::vector<NdTrialRecord> recs(opts.trials);
    parallel_for(opts.trials, opts.threads, [&](std::size_t t) {
      const std::size_t idx = gi * opts.trials + t;
      const auto draw = sample_graph(g, q, derive_seed(opts.seed, Stream::nd_testing, idx));
      const auto v = nd_value(draw.result, w, opts.mode,
                              EnergyOptions{opts.restarts, derive_seed(opts.seed, Stream::nd_local, idx + 1), 1});
      recs[t] = {w.name, q, t, src.value, v.value, src.value - v.value, src.exact && v.exact};
    });
    NdSummaryRow row;
    row.q = q;
    row.trials = opts.trials;
    std::vector<double> dev;
    for (const auto& r : recs) {
      dev.push_back(std::abs(r.deviation));
      row.mean_abs_dev += std::abs(r.deviation);
      row.one_sided_failure += r.f_sample < r.f_source - opts.epsilon;
      row.two_sided_failure += std::abs(r.deviation) > opts.epsilon;
    }
    if (opts.trials > 0) {
      const double tr = static_cast<double>(opts.trials);
      row.mean_abs_dev /= tr;
      row.one_sided_failure /= tr;
      row.two_sided_failure /= tr;
      row.median_abs_dev = detail::quantile(dev, 0.5);
    }
    ex.summary.push_back(row);
    ex.records.insert(ex.records.end(), recs.begin(), recs.end());
  }
  return ex;
}

inline void write_csv(std::ostream& out, const NdExperiment& ex) {
  out << "witness,q,trial,f_source,f_sample,deviation,mode\n";
  for (const auto& r : ex.records)
    out << r.witness << ',' << r.q << ',' << r.trial << ',' << format_double(r.f_source) << ','
        << format_double(r.f_sample) << ',' << format_double(r.deviation) << ',' << (r.exact ? "exact" : "local")
        << '\n';
}

}  // namespace graphlim
