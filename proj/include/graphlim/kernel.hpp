#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphlim/errors.hpp"
#include "graphlim/graph.hpp"
#include "graphlim/matrix.hpp"
#include "graphlim/partition.hpp"

namespace graphlim {

inline constexpr double kValueTolerance = 1e-12;
inline constexpr double kSimplexTolerance = 1e-9;

/// Kernel that is constant on the rectangles P_i x P_j of an interval
/// partition. Everything else in the library works on these.
class StepKernel {
 public:
  /// `bound` defaults to the largest absolute entry.
  StepKernel(IntervalPartition partition, Matrix values, std::optional<double> bound = std::nullopt)
      : partition_(std::move(partition)), values_(std::move(values)) {
    const std::size_t t = partition_.size();
    detail::require(values_.rows() == t && values_.cols() == t,
                    "kernel values must be " + std::to_string(t) + "x" + std::to_string(t));
    for (double v : values_.data()) detail::require(std::isfinite(v), "kernel values must be finite");
    bound_ = bound.value_or(values_.max_abs());
    detail::require(bound_ >= 0.0, "kernel bound must be non-negative");
    detail::require(values_.max_abs() <= bound_ + kValueTolerance, "kernel value exceeds its bound");
  }

  static StepKernel constant(double c, IntervalPartition partition = IntervalPartition::trivial()) {
    const std::size_t t = partition.size();
    return StepKernel(std::move(partition), Matrix(t, t, c));
  }

  const IntervalPartition& partition() const noexcept { return partition_; }
  std::size_t classes() const noexcept { return partition_.size(); }
  double measure(std::size_t i) const { return partition_.measure(i); }
  const Matrix& values() const noexcept { return values_; }
  double value(std::size_t i, std::size_t j) const { return values_(i, j); }
  double bound() const noexcept { return bound_; }

  bool symmetric(double tol = kValueTolerance) const {
    for (std::size_t i = 0; i < classes(); ++i)
      for (std::size_t j = i + 1; j < classes(); ++j)
        if (std::abs(values_(i, j) - values_(j, i)) > tol) return false;
    return true;
  }

  /// Block integrals: entry (i,j) is the integral of W over P_i x P_j.
  Matrix mass_matrix() const {
    Matrix m(classes(), classes());
    for (std::size_t i = 0; i < classes(); ++i)
      for (std::size_t j = 0; j < classes(); ++j) m(i, j) = values_(i, j) * measure(i) * measure(j);
    return m;
  }

  double integral() const { return mass_matrix().sum(); }

  /// The same step function written over a refinement of its partition.
  StepKernel rebase(const IntervalPartition& finer) const {
    const Partition owner = coarsening_map(finer, partition_);
    Matrix v(finer.size(), finer.size());
    for (std::size_t i = 0; i < finer.size(); ++i)
      for (std::size_t j = 0; j < finer.size(); ++j) v(i, j) = values_(owner.label(i), owner.label(j));
    return StepKernel(finer, std::move(v), bound_);
  }

  /// Rearranges the classes: class i of the result is class perm[i] of this
  /// kernel. The intervals move with their values, so the map is measure
  /// preserving and every norm is unchanged.
  StepKernel permuted(std::span<const std::size_t> perm) const {
    const std::size_t t = classes();
    detail::require(perm.size() == t, "permutation size mismatch");
    std::vector<char> seen(t, 0);
    for (std::size_t p : perm) {
      detail::require(p < t && !seen[p], "not a permutation");
      seen[p] = 1;
    }
    std::vector<double> measures(t);
    Matrix v(t, t);
    for (std::size_t i = 0; i < t; ++i) {
      measures[i] = measure(perm[i]);
      for (std::size_t j = 0; j < t; ++j) v(i, j) = values_(perm[i], perm[j]);
    }
    std::optional<IntervalPartition> p;
    if (auto n = partition_.alignment()) {
      std::vector<std::size_t> units(t);
      for (std::size_t i = 0; i < t; ++i) units[i] = partition_.units()[perm[i]];
      p = IntervalPartition::from_units(std::move(units), *n);
    } else {
      p = IntervalPartition(std::move(measures));
    }
    return StepKernel(std::move(*p), std::move(v), bound_);
  }

  StepKernel transposed() const { return StepKernel(partition_, values_.transposed(), bound_); }

  StepKernel scaled(double s) const { return StepKernel(partition_, values_ * s, bound_ * std::abs(s)); }

 private:
  IntervalPartition partition_;
  Matrix values_;
  double bound_ = 0.0;
};

/// Pointwise difference, written over the common refinement of both partitions.
inline StepKernel operator-(const StepKernel& a, const StepKernel& b) {
  if (a.partition() == b.partition())
    return StepKernel(a.partition(), a.values() - b.values(), a.bound() + b.bound());
  const auto r = common_refinement(a.partition(), b.partition());
  return StepKernel(r.partition, a.rebase(r.partition).values() - b.rebase(r.partition).values(),
                    a.bound() + b.bound());
}

inline StepKernel operator+(const StepKernel& a, const StepKernel& b) {
  if (a.partition() == b.partition())
    return StepKernel(a.partition(), a.values() + b.values(), a.bound() + b.bound());
  const auto r = common_refinement(a.partition(), b.partition());
  return StepKernel(r.partition, a.rebase(r.partition).values() + b.rebase(r.partition).values(),
                    a.bound() + b.bound());
}

/// Symmetric step kernel with values in [0,1].
class StepGraphon {
 public:
  StepGraphon(IntervalPartition partition, Matrix values) : kernel_(check(std::move(partition), std::move(values))) {}

  explicit StepGraphon(const StepKernel& kernel) : StepGraphon(kernel.partition(), kernel.values()) {}

  static StepGraphon constant(double p, IntervalPartition partition = IntervalPartition::trivial()) {
    const std::size_t t = partition.size();
    return StepGraphon(std::move(partition), Matrix(t, t, p));
  }

  const StepKernel& kernel() const noexcept { return kernel_; }
  operator const StepKernel&() const noexcept { return kernel_; }

  const IntervalPartition& partition() const noexcept { return kernel_.partition(); }
  std::size_t classes() const noexcept { return kernel_.classes(); }
  double measure(std::size_t i) const { return kernel_.measure(i); }
  const Matrix& values() const noexcept { return kernel_.values(); }
  double value(std::size_t i, std::size_t j) const { return kernel_.value(i, j); }

  StepGraphon rebase(const IntervalPartition& finer) const { return StepGraphon(kernel_.rebase(finer)); }
  StepGraphon permuted(std::span<const std::size_t> perm) const { return StepGraphon(kernel_.permuted(perm)); }

 private:
  static StepKernel check(IntervalPartition partition, Matrix values) {
    for (double& v : values.data()) {
      detail::require(v >= -kValueTolerance && v <= 1.0 + kValueTolerance, "graphon values must lie in [0,1]");
      v = std::clamp(v, 0.0, 1.0);
    }
    StepKernel k(std::move(partition), std::move(values), 1.0);
    detail::require(k.symmetric(), "graphon values must be symmetric");
    return k;
  }

  StepKernel kernel_;
};

/// k x k family of step kernels W^(a,b) over one interval partition with
/// W^(a,b)(x,y) = W^(b,a)(y,x) and the components summing to 1 pointwise.
class ColoredDigraphon {
 public:
  ColoredDigraphon(std::size_t k, IntervalPartition partition, std::vector<Matrix> blocks)
      : k_(k), partition_(std::move(partition)), blocks_(std::move(blocks)) {
    validate();
  }

  /// Every cell carries the uniform point of the simplex.
  static ColoredDigraphon uniform(std::size_t k, IntervalPartition partition = IntervalPartition::trivial()) {
    const std::size_t t = partition.size();
    const double u = 1.0 / static_cast<double>(k * k);
    return ColoredDigraphon(k, std::move(partition), std::vector<Matrix>(k * k, Matrix(t, t, u)));
  }

  std::size_t k() const noexcept { return k_; }
  const IntervalPartition& partition() const noexcept { return partition_; }
  std::size_t classes() const noexcept { return partition_.size(); }
  double measure(std::size_t i) const { return partition_.measure(i); }

  const Matrix& block(std::size_t alpha, std::size_t beta) const { return blocks_[alpha * k_ + beta]; }
  double value(std::size_t alpha, std::size_t beta, std::size_t i, std::size_t j) const {
    return blocks_[alpha * k_ + beta](i, j);
  }
  std::span<const Matrix> blocks() const noexcept { return blocks_; }

  StepKernel component(std::size_t alpha, std::size_t beta) const {
    return StepKernel(partition_, block(alpha, beta), 1.0);
  }

  ColoredDigraphon rebase(const IntervalPartition& finer) const {
    std::vector<Matrix> out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) out.push_back(StepKernel(partition_, b, 1.0).rebase(finer).values());
    return ColoredDigraphon(k_, finer, std::move(out));
  }

  ColoredDigraphon permuted(std::span<const std::size_t> perm) const {
    std::vector<Matrix> out;
    out.reserve(blocks_.size());
    std::optional<IntervalPartition> p;
    for (const auto& b : blocks_) {
      auto moved = StepKernel(partition_, b, 1.0).permuted(perm);
      if (!p) p = moved.partition();
      out.push_back(moved.values());
    }
    return ColoredDigraphon(k_, std::move(*p), std::move(out));
  }

 private:
  void validate() {
    detail::require(k_ >= 1, "need at least one color");
    detail::require(blocks_.size() == k_ * k_, "need k*k blocks");
    const std::size_t t = partition_.size();
    for (auto& b : blocks_) {
      detail::require(b.rows() == t && b.cols() == t, "block dimensions must match the partition");
      for (double& v : b.data()) {
        detail::require(std::isfinite(v) && v >= -kValueTolerance, "digraphon entries must be non-negative");
        v = std::max(v, 0.0);
      }
    }
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < t; ++j) {
        double s = 0.0;
        for (const auto& b : blocks_) s += b(i, j);
        detail::require(std::abs(s - 1.0) <= kSimplexTolerance,
                        "digraphon cell (" + std::to_string(i) + "," + std::to_string(j) + ") sums to " +
                            std::to_string(s) + ", not 1");
        for (std::size_t a = 0; a < k_; ++a)
          for (std::size_t c = 0; c < k_; ++c)
            detail::require(std::abs(value(a, c, i, j) - value(c, a, j, i)) <= kSimplexTolerance,
                            "digraphon violates W^(a,b)(x,y) = W^(b,a)(y,x)");
      }
  }

  std::size_t k_;
  IntervalPartition partition_;
  std::vector<Matrix> blocks_;
};

/// Step graphon of a graph on the canonical n-partition.
inline StepGraphon graphon_of_graph(const SimpleGraph& g) {
  const std::size_t n = g.order();
  detail::require(n >= 1, "graph must have at least one vertex");
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) v(i, j) = g.adjacent(i, j) ? 1.0 : 0.0;
  return StepGraphon(IntervalPartition::canonical(n), std::move(v));
}

/// Colored digraphon of a colored digraph on the canonical n-partition. The
/// diagonal cells, where the digraph has no color, get the uniform point of
/// the simplex so that every cell sums to 1.
inline ColoredDigraphon digraphon_of_colored(const ColoredDigraph& g) {
  const std::size_t n = g.order();
  const std::size_t k = g.colors();
  detail::require(n >= 1, "digraph must have at least one vertex");
  std::vector<Matrix> blocks(k * k, Matrix(n, n));
  const double u = 1.0 / static_cast<double>(k * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        for (auto& b : blocks) b(i, i) = u;
      } else {
        blocks[g.color(i, j) * k + g.color(j, i)](i, j) = 1.0;
      }
    }
  return ColoredDigraphon(k, IntervalPartition::canonical(n), std::move(blocks));
}

}  // namespace graphlim
