#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphlim/errors.hpp"
#include "graphlim/partition.hpp"

namespace graphlim {

/// Simple undirected graph on vertices 0..n-1 stored as a dense adjacency
/// relation (the graphs here are dense and small).
class SimpleGraph {
 public:
  explicit SimpleGraph(std::size_t n = 0) : n_(n), adj_(n * n, 0) {}

  static SimpleGraph from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges) {
    SimpleGraph g(n);
    for (auto [u, v] : edges) g.add_edge(u, v);
    return g;
  }
  static SimpleGraph complete(std::size_t n) {
    SimpleGraph g(n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v) g.add_edge(u, v);
    return g;
  }
  static SimpleGraph cycle(std::size_t n) {
    SimpleGraph g(n);
    for (std::size_t u = 0; u < n && n >= 3; ++u) g.add_edge(u, (u + 1) % n);
    return g;
  }
  static SimpleGraph path(std::size_t n) {
    SimpleGraph g(n);
    for (std::size_t u = 0; u + 1 < n; ++u) g.add_edge(u, u + 1);
    return g;
  }

  std::size_t order() const noexcept { return n_; }

  bool adjacent(std::size_t u, std::size_t v) const { return adj_[u * n_ + v] != 0; }

  void add_edge(std::size_t u, std::size_t v) {
    detail::require(u < n_ && v < n_, "edge endpoint out of range");
    detail::require(u != v, "loops are not allowed");
    adj_[u * n_ + v] = adj_[v * n_ + u] = 1;
  }
  void remove_edge(std::size_t u, std::size_t v) { adj_[u * n_ + v] = adj_[v * n_ + u] = 0; }

  std::size_t degree(std::size_t v) const {
    std::size_t d = 0;
    for (std::size_t u = 0; u < n_; ++u) d += adj_[v * n_ + u];
    return d;
  }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (auto a : adj_) twice += a;
    return twice / 2;
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (std::size_t u = 0; u < n_; ++u)
      for (std::size_t v = u + 1; v < n_; ++v)
        if (adjacent(u, v)) e.emplace_back(u, v);
    return e;
  }

  SimpleGraph complement() const {
    SimpleGraph c(n_);
    for (std::size_t u = 0; u < n_; ++u)
      for (std::size_t v = u + 1; v < n_; ++v)
        if (!adjacent(u, v)) c.add_edge(u, v);
    return c;
  }

  /// Induced subgraph on `vertices`, relabelled 0..q-1 in the given order.
  SimpleGraph induced(std::span<const std::size_t> vertices) const {
    SimpleGraph h(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i)
      for (std::size_t j = i + 1; j < vertices.size(); ++j)
        if (adjacent(vertices[i], vertices[j])) h.add_edge(i, j);
    return h;
  }

  /// Graph whose vertex i is the old vertex perm[i].
  SimpleGraph relabeled(std::span<const std::size_t> perm) const {
    detail::require(perm.size() == n_, "relabeling size mismatch");
    return induced(perm);
  }

  friend bool operator==(const SimpleGraph&, const SimpleGraph&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint8_t> adj_;
};

/// t-fold equitable blow-up: vertex (u, a) becomes u * t + a; copies of u
/// and v are adjacent iff uv is an edge. Copies of one vertex are independent.
inline SimpleGraph blow_up(const SimpleGraph& g, std::size_t t) {
  detail::require(t >= 1, "blow-up factor must be positive");
  const std::size_t n = g.order();
  SimpleGraph b(n * t);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (g.adjacent(u, v))
        for (std::size_t a = 0; a < t; ++a)
          for (std::size_t c = 0; c < t; ++c) b.add_edge(u * t + a, v * t + c);
  return b;
}

/// Complete loop-free digraph whose ordered pairs (i, j), i != j, each carry
/// one of k colors 0..k-1. Diagonal entries hold kNoColor.
class ColoredDigraph {
 public:
  static constexpr std::size_t kNoColor = std::numeric_limits<std::size_t>::max();

  ColoredDigraph(std::size_t n, std::size_t k, std::size_t fill = 0) : n_(n), k_(k), colors_(n * n, fill) {
    detail::require(k >= 1, "need at least one color");
    detail::require(fill < k, "fill color out of range");
    for (std::size_t i = 0; i < n; ++i) colors_[i * n + i] = kNoColor;
  }

  std::size_t order() const noexcept { return n_; }
  std::size_t colors() const noexcept { return k_; }

  std::size_t color(std::size_t i, std::size_t j) const { return colors_[i * n_ + j]; }

  void set_color(std::size_t i, std::size_t j, std::size_t c) {
    detail::require(i < n_ && j < n_ && i != j, "colored pair out of range or on the diagonal");
    detail::require(c < k_, "color out of range");
    colors_[i * n_ + j] = c;
  }

  /// Colors (i, j) with alpha and (j, i) with beta.
  void set_pair(std::size_t i, std::size_t j, std::size_t alpha, std::size_t beta) {
    set_color(i, j, alpha);
    set_color(j, i, beta);
  }

  ColoredDigraph induced(std::span<const std::size_t> vertices) const {
    ColoredDigraph h(vertices.size(), k_);
    for (std::size_t i = 0; i < vertices.size(); ++i)
      for (std::size_t j = 0; j < vertices.size(); ++j)
        if (i != j) h.colors_[i * h.n_ + j] = color(vertices[i], vertices[j]);
    return h;
  }

  ColoredDigraph relabeled(std::span<const std::size_t> perm) const {
    detail::require(perm.size() == n_, "relabeling size mismatch");
    return induced(perm);
  }

  friend bool operator==(const ColoredDigraph&, const ColoredDigraph&) = default;

 private:
  std::size_t n_;
  std::size_t k_;
  std::vector<std::size_t> colors_;
};

/// Simple graph left after erasing every directed edge whose color is not
/// among the first m colors: uv is an edge iff color(u,v) < m or color(v,u) < m.
inline SimpleGraph shadow(const ColoredDigraph& g, std::size_t m) {
  detail::require(m <= g.colors(), "m must not exceed the number of colors");
  SimpleGraph s(g.order());
  for (std::size_t u = 0; u < g.order(); ++u)
    for (std::size_t v = u + 1; v < g.order(); ++v)
      if (g.color(u, v) < m || g.color(v, u) < m) s.add_edge(u, v);
  return s;
}

/// Color pair (alpha, beta) lies in the shadow set M iff one component is < m.
inline bool in_shadow_set(std::size_t alpha, std::size_t beta, std::size_t m) {
  return alpha < m || beta < m;
}

/// A (k,m)-coloring: a k-colored digraph together with the simple graph it
/// shadows.
class KMColoring {
 public:
  KMColoring(ColoredDigraph base, std::size_t m) : base_(std::move(base)), m_(m), shadow_(shadow(base_, m)) {}

  /// Checks that `base` is a (k,m)-coloring of `graph`.
  KMColoring(ColoredDigraph base, std::size_t m, const SimpleGraph& graph) : KMColoring(std::move(base), m) {
    detail::require(shadow_ == graph, "coloring does not shadow the given graph");
  }

  const ColoredDigraph& base() const noexcept { return base_; }
  std::size_t k() const noexcept { return base_.colors(); }
  std::size_t m() const noexcept { return m_; }
  const SimpleGraph& shadow_graph() const noexcept { return shadow_; }

 private:
  ColoredDigraph base_;
  std::size_t m_;
  SimpleGraph shadow_;
};

/// 3-uniform hypergraph as a symmetric 0/1 array with zero diagonal hyperplanes.
class Hypergraph3 {
 public:
  explicit Hypergraph3(std::size_t n = 0) : n_(n), adj_(n * n * n, 0) {}

  std::size_t order() const noexcept { return n_; }
  static constexpr std::size_t rank() noexcept { return 3; }

  bool adjacent(std::size_t u, std::size_t v, std::size_t w) const { return adj_[(u * n_ + v) * n_ + w] != 0; }

  void add_edge(std::size_t u, std::size_t v, std::size_t w) {
    detail::require(u < n_ && v < n_ && w < n_, "hyperedge endpoint out of range");
    detail::require(u != v && v != w && u != w, "hyperedge vertices must be distinct");
    const std::size_t idx[3] = {u, v, w};
    static constexpr std::size_t perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : perms) adj_[(idx[p[0]] * n_ + idx[p[1]]) * n_ + idx[p[2]]] = 1;
  }

  std::size_t edge_count() const {
    std::size_t c = 0;
    for (auto a : adj_) c += a;
    return c / 6;
  }

  friend bool operator==(const Hypergraph3&, const Hypergraph3&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint8_t> adj_;
};

/// Partition of the tuple set [k]^r into m (possibly empty) parts. A tuple
/// z = (z_1, ..., z_r) has index sum z_j k^(r-j), i.e. row-major order.
class PatternPartition {
 public:
  PatternPartition(std::size_t k, std::size_t r, std::size_t m, std::vector<std::size_t> part)
      : k_(k), r_(r), m_(m), part_(std::move(part)) {
    detail::require(k >= 1 && (r == 2 || r == 3), "pattern partitions need k >= 1 and rank 2 or 3");
    detail::require(part_.size() == tuple_count(), "pattern partition must label all of [k]^r");
    for (auto p : part_) detail::require(p < m_, "pattern part out of range");
  }

  /// Everything in one part, padded to m parts.
  static PatternPartition single(std::size_t k, std::size_t r, std::size_t m) {
    std::size_t count = 1;
    for (std::size_t j = 0; j < r; ++j) count *= k;
    return PatternPartition(k, r, m, std::vector<std::size_t>(count, 0));
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t rank() const noexcept { return r_; }
  std::size_t parts() const noexcept { return m_; }
  std::size_t tuple_count() const noexcept {
    std::size_t c = 1;
    for (std::size_t j = 0; j < r_; ++j) c *= k_;
    return c;
  }

  std::size_t part_of(std::size_t a, std::size_t b) const { return part_[a * k_ + b]; }
  std::size_t part_of(std::size_t a, std::size_t b, std::size_t c) const { return part_[(a * k_ + b) * k_ + c]; }
  std::span<const std::size_t> labels() const noexcept { return part_; }

  friend bool operator==(const PatternPartition&, const PatternPartition&) = default;

 private:
  std::size_t k_;
  std::size_t r_;
  std::size_t m_;
  std::vector<std::size_t> part_;
};

/// Node-(k,m)-coloring data: a graph (rank 2) or 3-graph, a node partition
/// into k parts and a pair of pattern partitions of [k]^r into m parts, one
/// for edges and one for non-edges.
template <class Graph>
struct NodeKMColoring {
  Graph graph;
  NodePartition parts;
  PatternPartition edge_classes;
  PatternPartition nonedge_classes;

  std::size_t k() const { return edge_classes.k(); }
  std::size_t m() const { return edge_classes.parts(); }

  void validate() const {
    detail::require(parts.size() == graph.order(), "node partition must cover every vertex");
    detail::require(parts.classes() == edge_classes.k(), "node partition must have k parts");
    detail::require(edge_classes.k() == nonedge_classes.k() && edge_classes.parts() == nonedge_classes.parts() &&
                        edge_classes.rank() == nonedge_classes.rank(),
                    "edge and non-edge pattern partitions disagree on (k, m, r)");
  }
};

}  // namespace graphlim
