#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphlim/errors.hpp"

namespace graphlim {

inline constexpr double kMeasureTolerance = 1e-12;
inline constexpr double kAlignmentTolerance = 1e-9;

/// Partition of [0,1] into consecutive intervals with the given Lebesgue
/// measures. When an alignment n is known every measure is an integer
/// multiple of 1/n and is stored exactly as an integer count of 1/n units.
class IntervalPartition {
 public:
  explicit IntervalPartition(std::vector<double> measures,
                             std::optional<std::size_t> alignment = std::nullopt) {
    detail::require(!measures.empty(), "partition needs at least one class");
    double total = 0.0;
    for (double m : measures) {
      detail::require(std::isfinite(m) && m >= 0.0, "class measures must be non-negative");
      total += m;
    }
    detail::require(std::abs(total - 1.0) <= kMeasureTolerance,
                    "class measures must sum to 1 (got " + std::to_string(total) + ")");
    if (alignment) {
      const std::size_t n = *alignment;
      detail::require(n >= 1, "alignment must be positive");
      std::vector<std::size_t> units;
      units.reserve(measures.size());
      for (double m : measures) {
        const double scaled = m * static_cast<double>(n);
        const double rounded = std::round(scaled);
        detail::require(std::abs(scaled - rounded) <= kAlignmentTolerance,
                        "measure is not a multiple of 1/" + std::to_string(n));
        units.push_back(static_cast<std::size_t>(rounded));
      }
      *this = from_units(std::move(units), n);
      return;
    }
    measures_ = std::move(measures);
  }

  static IntervalPartition from_units(std::vector<std::size_t> units, std::size_t n) {
    detail::require(n >= 1 && !units.empty(), "aligned partition needs n >= 1 and a class");
    detail::require(std::accumulate(units.begin(), units.end(), std::size_t{0}) == n,
                    "unit counts must sum to n");
    IntervalPartition p;
    p.measures_.reserve(units.size());
    for (std::size_t u : units) p.measures_.push_back(static_cast<double>(u) / static_cast<double>(n));
    p.units_ = std::move(units);
    p.alignment_ = n;
    return p;
  }

  /// Canonical n-partition: n intervals of measure 1/n.
  static IntervalPartition canonical(std::size_t n) {
    return from_units(std::vector<std::size_t>(n, 1), n);
  }

  static IntervalPartition trivial() { return IntervalPartition({1.0}); }

  std::size_t size() const noexcept { return measures_.size(); }
  double measure(std::size_t i) const { return measures_[i]; }
  std::span<const double> measures() const noexcept { return measures_; }
  std::optional<std::size_t> alignment() const noexcept { return alignment_; }
  /// Integer unit counts; empty unless aligned.
  std::span<const std::size_t> units() const noexcept { return units_; }

  bool equal_measures(double tol = kMeasureTolerance) const {
    return std::all_of(measures_.begin(), measures_.end(),
                       [&](double m) { return std::abs(m - measures_.front()) <= tol; });
  }

  /// Cumulative breakpoints 0 = b_0 <= ... <= b_t = 1.
  std::vector<double> breakpoints() const {
    std::vector<double> b(measures_.size() + 1, 0.0);
    if (alignment_) {
      std::size_t acc = 0;
      for (std::size_t i = 0; i < units_.size(); ++i) {
        acc += units_[i];
        b[i + 1] = static_cast<double>(acc) / static_cast<double>(*alignment_);
      }
    } else {
      for (std::size_t i = 0; i < measures_.size(); ++i) b[i + 1] = b[i] + measures_[i];
      b.back() = 1.0;
    }
    return b;
  }

  friend bool operator==(const IntervalPartition&, const IntervalPartition&) = default;

 private:
  IntervalPartition() = default;

  std::vector<double> measures_;
  std::vector<std::size_t> units_;
  std::optional<std::size_t> alignment_;
};

struct IntervalRefinement {
  IntervalPartition partition;
  std::vector<std::size_t> first;   ///< output class -> class of the first input
  std::vector<std::size_t> second;  ///< output class -> class of the second input
};

/// Coarsest common refinement of two interval partitions by breakpoint
/// merge. Zero-measure input classes do not produce output classes.
inline IntervalRefinement common_refinement(const IntervalPartition& p, const IntervalPartition& q) {
  if (p.alignment() && q.alignment()) {
    if (*p.alignment() != *q.alignment())
      throw InvalidArgument("incompatible alignments: " + std::to_string(*p.alignment()) + " vs " +
                            std::to_string(*q.alignment()));
    const std::size_t n = *p.alignment();
    std::vector<std::size_t> units, first, second;
    std::size_t i = 0, j = 0, pos = 0, end_p = 0, end_q = 0;
    auto skip_empty = [](std::span<const std::size_t> u, std::size_t& k, std::size_t& end) {
      while (k < u.size() && u[k] == 0) ++k;
      if (k < u.size()) end += u[k];
    };
    skip_empty(p.units(), i, end_p);
    skip_empty(q.units(), j, end_q);
    while (pos < n) {
      const std::size_t end = std::min(end_p, end_q);
      units.push_back(end - pos);
      first.push_back(i);
      second.push_back(j);
      pos = end;
      if (end_p == end) { ++i; skip_empty(p.units(), i, end_p); }
      if (end_q == end) { ++j; skip_empty(q.units(), j, end_q); }
    }
    return {IntervalPartition::from_units(std::move(units), n), std::move(first), std::move(second)};
  }

  const auto bp = p.breakpoints();
  const auto bq = q.breakpoints();
  std::vector<double> measures;
  std::vector<std::size_t> first, second;
  std::size_t i = 0, j = 0;
  double pos = 0.0;
  auto advance_empty = [](const std::vector<double>& b, std::size_t& k, double at) {
    while (k + 1 < b.size() && b[k + 1] <= at + kMeasureTolerance) ++k;
  };
  advance_empty(bp, i, pos);
  advance_empty(bq, j, pos);
  while (i + 1 < bp.size() && j + 1 < bq.size()) {
    const double end = std::min(bp[i + 1], bq[j + 1]);
    measures.push_back(end - pos);
    first.push_back(i);
    second.push_back(j);
    pos = end;
    advance_empty(bp, i, pos);
    advance_empty(bq, j, pos);
  }
  // Absorb rounding drift so the measures sum to exactly one.
  const double total = std::accumulate(measures.begin(), measures.end(), 0.0);
  measures.back() += 1.0 - total;
  return {IntervalPartition(std::move(measures)), std::move(first), std::move(second)};
}

/// Partition of a finite ground set {0, ..., size-1} (interval classes of a
/// step kernel, or graph nodes) into a fixed number of labelled classes.
/// Classes may be empty.
class Partition {
 public:
  Partition() = default;

  Partition(std::vector<std::size_t> labels, std::size_t classes)
      : labels_(std::move(labels)), classes_(classes) {
    for (std::size_t l : labels_)
      detail::require(l < classes_, "partition label out of range");
  }

  static Partition from_labels(std::vector<std::size_t> labels) {
    const std::size_t c = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    return Partition(std::move(labels), c);
  }
  static Partition trivial(std::size_t size) { return Partition(std::vector<std::size_t>(size, 0), 1); }
  static Partition discrete(std::size_t size) {
    std::vector<std::size_t> labels(size);
    std::iota(labels.begin(), labels.end(), std::size_t{0});
    return Partition(std::move(labels), size);
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t classes() const noexcept { return classes_; }
  std::size_t label(std::size_t i) const { return labels_[i]; }
  std::span<const std::size_t> labels() const noexcept { return labels_; }

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> m(classes_);
    for (std::size_t i = 0; i < labels_.size(); ++i) m[labels_[i]].push_back(i);
    return m;
  }

  std::vector<std::size_t> class_sizes() const {
    std::vector<std::size_t> s(classes_, 0);
    for (std::size_t l : labels_) ++s[l];
    return s;
  }

  std::size_t nonempty_classes() const {
    const auto s = class_sizes();
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](std::size_t c) { return c > 0; }));
  }

  /// Relabel classes in order of first appearance and drop empty ones.
  Partition canonical() const {
    std::vector<std::size_t> remap(classes_, classes_);
    std::vector<std::size_t> out(labels_.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      auto& r = remap[labels_[i]];
      if (r == classes_) r = next++;
      out[i] = r;
    }
    return Partition(std::move(out), next);
  }

  std::vector<double> class_measures(const IntervalPartition& base) const {
    detail::require(base.size() == labels_.size(), "partition and base sizes differ");
    std::vector<double> m(classes_, 0.0);
    for (std::size_t i = 0; i < labels_.size(); ++i) m[labels_[i]] += base.measure(i);
    return m;
  }

  /// True when every class of *this lies inside one class of `coarser`.
  bool refines(const Partition& coarser) const {
    if (coarser.size() != size()) return false;
    std::vector<std::size_t> owner(classes_, coarser.classes());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      auto& o = owner[labels_[i]];
      if (o == coarser.classes()) o = coarser.label(i);
      else if (o != coarser.label(i)) return false;
    }
    return true;
  }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<std::size_t> labels_;
  std::size_t classes_ = 0;
};

/// Node partitions share the representation; empty parts are allowed.
using NodePartition = Partition;

/// A pair of ground-set subsets (S, T), given as element indices.
struct SplitPair {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
};

struct PartitionRefinement {
  Partition partition;               ///< canonical: no empty classes
  std::vector<std::size_t> first;    ///< output class -> class of p
  std::vector<std::size_t> second;   ///< output class -> class of q
};

/// Coarsest common refinement of p, q and every set of the split pairs.
/// The class count is at most p.classes() * q.classes() * 4^splits.size().
inline PartitionRefinement common_refinement(const Partition& p, const Partition& q,
                                             std::span<const SplitPair> splits = {}) {
  detail::require(p.size() == q.size(), "partitions over different ground sets");
  const std::size_t n = p.size();
  std::vector<std::vector<char>> member;
  for (const auto& s : splits) {
    for (const auto* set : {&s.first, &s.second}) {
      std::vector<char> m(n, 0);
      for (std::size_t a : *set) {
        detail::require(a < n, "split set element out of range");
        m[a] = 1;
      }
      member.push_back(std::move(m));
    }
  }
  std::map<std::vector<std::size_t>, std::size_t> ids;
  std::vector<std::size_t> labels(n), first, second;
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> key{p.label(a), q.label(a)};
    for (const auto& m : member) key.push_back(static_cast<std::size_t>(m[a]));
    auto [it, inserted] = ids.try_emplace(std::move(key), ids.size());
    if (inserted) {
      first.push_back(p.label(a));
      second.push_back(q.label(a));
    }
    labels[a] = it->second;
  }
  return {Partition(std::move(labels), ids.size()), std::move(first), std::move(second)};
}

/// Labels each class of `fine` by the class of `coarse` that contains it.
/// Throws when some fine class straddles a coarse breakpoint.
inline Partition coarsening_map(const IntervalPartition& fine, const IntervalPartition& coarse) {
  const auto bf = fine.breakpoints();
  const auto bc = coarse.breakpoints();
  std::vector<std::size_t> labels(fine.size());
  std::size_t c = 0;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const double lo = bf[i];
    const double hi = bf[i + 1];
    while (c + 1 < coarse.size() && bc[c + 1] <= lo + kMeasureTolerance) ++c;
    if (hi > bc[c + 1] + kMeasureTolerance)
      throw InvalidArgument("incompatible partitions: class " + std::to_string(i) +
                            " straddles a breakpoint of the coarser partition");
    labels[i] = c;
  }
  return Partition(std::move(labels), coarse.size());
}

/// Visits every partition of {0..n-1} into exactly `classes` non-empty
/// classes (restricted growth strings, lexicographic order). The visitor
/// returns false to stop early.
template <class Visitor>
void for_each_set_partition(std::size_t n, std::size_t classes, Visitor&& visit) {
  if (classes == 0 || classes > n) return;
  std::vector<std::size_t> labels(n, 0);
  auto recurse = [&](auto&& self, std::size_t pos, std::size_t used) -> bool {
    if (n - pos < classes - used) return true;
    if (pos == n) {
      if (used == classes) return visit(Partition(labels, classes));
      return true;
    }
    const std::size_t limit = std::min(used + 1, classes);
    for (std::size_t l = 0; l < limit; ++l) {
      labels[pos] = l;
      if (!self(self, pos + 1, std::max(used, l + 1))) return false;
    }
    return true;
  };
  recurse(recurse, 0, 0);
}

}  // namespace graphlim
