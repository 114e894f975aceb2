#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "graphlim/errors.hpp"
#include "graphlim/graph.hpp"
#include "graphlim/kernel.hpp"
#include "graphlim/partition.hpp"
#include "graphlim/rng.hpp"

namespace graphlim {

inline constexpr double kEnumerationLimit = 1e7;

namespace detail {

/// Allowed (a,b) color pairs, row-major, for edges and for non-edges.
inline std::pair<std::vector<std::pair<std::size_t, std::size_t>>, std::vector<std::pair<std::size_t, std::size_t>>>
color_options(std::size_t k, std::size_t m) {
  std::vector<std::pair<std::size_t, std::size_t>> edge, nonedge;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) (in_shadow_set(a, b, m) ? edge : nonedge).emplace_back(a, b);
  return {std::move(edge), std::move(nonedge)};
}

}  // namespace detail

/// Number of (k,m)-colorings of G: (k^2 - (k-m)^2)^|E| ((k-m)^2)^(C(n,2) - |E|).
inline double count_km_colorings(const SimpleGraph& g, std::size_t k, std::size_t m) {
  detail::require(k >= 1 && m <= k, "need 1 <= k and m <= k");
  const double e = static_cast<double>(g.edge_count());
  const double n = static_cast<double>(g.order());
  const double km = static_cast<double>((k - m) * (k - m));
  return std::pow(static_cast<double>(k * k) - km, e) * std::pow(km, n * (n - 1) / 2.0 - e);
}

/// Visits every (k,m)-coloring of G. Pairs i < j are taken in row-major
/// order, the first pair being the most significant digit; the allowed
/// color pairs of each vertex pair are in row-major (a,b) order. The
/// visitor receives the colored digraph and returns false to stop.
template <class Visitor>
void for_each_km_coloring(const SimpleGraph& g, std::size_t k, std::size_t m, Visitor&& visit) {
  const double count = count_km_colorings(g, k, m);
  if (count > kEnumerationLimit)
    throw GuardError("D-17", "coloring enumeration limit exceeded: " + std::to_string(count) + " > 1e7 colorings");
  if (count == 0.0) return;
  const auto [edge_opts, nonedge_opts] = detail::color_options(k, m);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<const std::vector<std::pair<std::size_t, std::size_t>>*> opts;
  for (std::size_t i = 0; i < g.order(); ++i)
    for (std::size_t j = i + 1; j < g.order(); ++j) {
      pairs.emplace_back(i, j);
      opts.push_back(g.adjacent(i, j) ? &edge_opts : &nonedge_opts);
    }
  ColoredDigraph c(g.order(), k);
  std::vector<std::size_t> digit(pairs.size(), 0);
  for (std::size_t p = 0; p < pairs.size(); ++p) c.set_pair(pairs[p].first, pairs[p].second, (*opts[p])[0].first,
                                                             (*opts[p])[0].second);
  for (;;) {
    if (!visit(static_cast<const ColoredDigraph&>(c))) return;
    std::size_t p = pairs.size();
    while (p > 0) {
      --p;
      if (++digit[p] < opts[p]->size()) break;
      digit[p] = 0;
      if (p == 0) {
        p = pairs.size();  // wrapped around: done
        break;
      }
    }
    if (p == pairs.size()) return;
    for (std::size_t q = p; q < pairs.size(); ++q) {
      const auto& o = (*opts[q])[digit[q]];
      c.set_pair(pairs[q].first, pairs[q].second, o.first, o.second);
    }
  }
}

/// All (k,m)-colorings of G, at most `limit` of them, in enumeration order.
inline std::vector<KMColoring> enumerate_km_colorings(const SimpleGraph& g, std::size_t k, std::size_t m,
                                                      std::size_t limit = SIZE_MAX) {
  std::vector<KMColoring> out;
  if (limit == 0) return out;
  for_each_km_coloring(g, k, m, [&](const ColoredDigraph& c) {
    out.emplace_back(c, m);
    return out.size() < limit;
  });
  return out;
}

/// Transfers a (k,m)-coloring of U to V. On each cell,
///   (a,b) in M:      V^(a,b) = V U^(a,b) / U               (U > 0)
///                            = V / (k^2 - (k-m)^2)          (U = 0)
///   (a,b) not in M:  V^(a,b) = (1-V) U^(a,b) / (1-U)        (U < 1)
///                            = (1-V) / (k-m)^2              (U = 1)
/// so the M-components of the result sum to V. Everything is evaluated on
/// the common refinement of the inputs and P.
inline ColoredDigraphon transfer_coloring(const StepGraphon& u, const ColoredDigraphon& cu, const StepGraphon& v,
                                          const IntervalPartition& p, std::size_t m) {
  const std::size_t k = cu.k();
  detail::require(m <= k, "m must not exceed k");
  IntervalPartition base = common_refinement(u.kernel().partition(), cu.partition()).partition;
  base = common_refinement(base, v.kernel().partition()).partition;
  base = common_refinement(base, p).partition;
  const StepKernel ur = u.kernel().rebase(base), vr = v.kernel().rebase(base);
  const ColoredDigraphon cr = cu.rebase(base);
  const std::size_t t = base.size();
  const double in_m = static_cast<double>(k * k - (k - m) * (k - m));
  const double out_m = static_cast<double>((k - m) * (k - m));
  std::vector<Matrix> blocks(k * k, Matrix(t, t));
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      const double uu = ur.value(i, j), vv = vr.value(i, j);
      if ((m == k && vv < 1.0 - kSimplexTolerance) || (m == 0 && vv > kSimplexTolerance))
        throw InvalidArgument("no (k,m)-coloring of V exists: m = " + std::to_string(m) + " forces V = " +
                              (m == 0 ? "0" : "1"));
      double s = 0.0;
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
          if (in_shadow_set(a, b, m)) s += cr.value(a, b, i, j);
      if (std::abs(s - uu) > kSimplexTolerance)
        throw InvalidArgument("simplex violation: shadow components sum to " + std::to_string(s) + " but U = " +
                              std::to_string(uu) + " on cell (" + std::to_string(i) + "," + std::to_string(j) + ")");
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
          double x;
          if (in_shadow_set(a, b, m))
            x = uu > 1e-12 ? vv * cr.value(a, b, i, j) / uu : vv / in_m;
          else
            x = 1.0 - uu > 1e-12 ? (1.0 - vv) * cr.value(a, b, i, j) / (1.0 - uu) : (1.0 - vv) / out_m;
          blocks[a * k + b](i, j) = x;
        }
    }
  return ColoredDigraphon(k, base, std::move(blocks));
}

/// Rounds an I_n colored digraphon that colors W_G to a (k,m)-coloring of
/// G: every pair i < j independently gets (color(i,j), color(j,i)) = (a,b)
/// with probability V^(a,b) on cell (i,j).
inline KMColoring round_to_graph_coloring(const ColoredDigraphon& v, const SimpleGraph& g, std::size_t m,
                                          std::uint64_t seed) {
  const std::size_t n = g.order(), k = v.k();
  detail::require(v.classes() == n && v.partition().equal_measures(), "digraphon must be an I_n step function");
  detail::require(m <= k, "m must not exceed k");
  Rng rng(seed, Stream::coloring_rounding);
  ColoredDigraph out(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t ab = 0; ab < k * k; ++ab)
        if (in_shadow_set(ab / k, ab % k, m)) s += v.value(ab / k, ab % k, i, j);
      if (std::abs(s - (g.adjacent(i, j) ? 1.0 : 0.0)) > kSimplexTolerance)
        throw InvalidArgument("digraphon is not shadow-consistent with the graph at pair (" + std::to_string(i) +
                              "," + std::to_string(j) + ")");
      const double x = rng.uniform();
      double acc = 0.0;
      std::size_t pick = k * k, last = 0;
      for (std::size_t ab = 0; ab < k * k; ++ab) {
        const double p = v.value(ab / k, ab % k, i, j);
        if (p <= 0.0) continue;
        last = ab;
        acc += p;
        if (x < acc) {
          pick = ab;
          break;
        }
      }
      if (pick == k * k) pick = last;
      out.set_pair(i, j, pick / k, pick % k);
    }
  return KMColoring(std::move(out), m, g);
}

/// The 2m graphs (G_1..G_m, G~_1..G~_m) of a node-(k,m)-coloring: G_i keeps
/// the edges uv of G with (T(u),T(v)) or (T(v),T(u)) in edge class i, and
/// G~_i the non-edges with such a pattern in non-edge class i.
inline std::vector<SimpleGraph> node_coloring(const NodeKMColoring<SimpleGraph>& c) {
  c.validate();
  detail::require(c.edge_classes.rank() == 2, "rank-2 pattern partitions expected");
  const std::size_t n = c.graph.order(), m = c.m();
  std::vector<SimpleGraph> out(2 * m, SimpleGraph(n));
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) {
      const std::size_t a = c.parts.label(u), b = c.parts.label(v);
      const auto& d = c.graph.adjacent(u, v) ? c.edge_classes : c.nonedge_classes;
      const std::size_t offset = c.graph.adjacent(u, v) ? 0 : m;
      out[offset + d.part_of(a, b)].add_edge(u, v);
      if (d.part_of(b, a) != d.part_of(a, b)) out[offset + d.part_of(b, a)].add_edge(u, v);
    }
  return out;
}

/// Rank-3 version: hyperedges (and non-edges) are sorted by the classes of
/// their node patterns under every ordering of the three vertices.
inline std::vector<Hypergraph3> node_coloring(const NodeKMColoring<Hypergraph3>& c) {
  c.validate();
  detail::require(c.edge_classes.rank() == 3, "rank-3 pattern partitions expected");
  const std::size_t n = c.graph.order(), m = c.m();
  std::vector<Hypergraph3> out(2 * m, Hypergraph3(n));
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      for (std::size_t w = v + 1; w < n; ++w) {
        const bool edge = c.graph.adjacent(u, v, w);
        const auto& d = edge ? c.edge_classes : c.nonedge_classes;
        const std::size_t offset = edge ? 0 : m;
        const std::size_t z[3] = {c.parts.label(u), c.parts.label(v), c.parts.label(w)};
        static constexpr std::size_t perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        std::vector<char> hit(m, 0);
        for (const auto& p : perms) hit[d.part_of(z[p[0]], z[p[1]], z[p[2]])] = 1;
        for (std::size_t i = 0; i < m; ++i)
          if (hit[i]) out[offset + i].add_edge(u, v, w);
      }
  return out;
}

}  // namespace graphlim
