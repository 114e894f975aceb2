#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphlim/errors.hpp"
#include "graphlim/kernel.hpp"
#include "graphlim/matrix.hpp"
#include "graphlim/norms.hpp"
#include "graphlim/parallel.hpp"
#include "graphlim/partition.hpp"
#include "graphlim/rng.hpp"

namespace graphlim {

// ---------------------------------------------------------------------------
// averaging

namespace detail {

/// Block sums of `mass` over the rectangles of a grouping.
inline Matrix group_sums(const Matrix& mass, const Partition& groups) {
  Matrix g(groups.classes(), groups.classes());
  for (std::size_t a = 0; a < mass.rows(); ++a)
    for (std::size_t b = 0; b < mass.cols(); ++b) g(groups.label(a), groups.label(b)) += mass(a, b);
  return g;
}

/// Mean values on the rectangles of a grouping; zero on null rectangles.
inline Matrix group_means(const Matrix& mass, const Partition& groups, std::span<const double> group_measure) {
  Matrix g = group_sums(mass, groups);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) {
      const double area = group_measure[i] * group_measure[j];
      g(i, j) = area > 0.0 ? g(i, j) / area : 0.0;
    }
  return g;
}

inline Matrix expand(const Matrix& group_values, const Partition& groups) {
  const std::size_t t = groups.size();
  Matrix v(t, t);
  for (std::size_t a = 0; a < t; ++a)
    for (std::size_t b = 0; b < t; ++b) v(a, b) = group_values(groups.label(a), groups.label(b));
  return v;
}

inline Matrix average_values(const Matrix& values, const IntervalPartition& atoms, const Partition& groups) {
  detail::require(groups.size() == atoms.size(), "grouping must label every class");
  const auto gm = groups.class_measures(atoms);
  Matrix mass(values.rows(), values.cols());
  for (std::size_t a = 0; a < values.rows(); ++a)
    for (std::size_t b = 0; b < values.cols(); ++b) mass(a, b) = values(a, b) * atoms.measure(a) * atoms.measure(b);
  return expand(group_means(mass, groups, gm), groups);
}

/// ||W_P||_2^2 for P a grouping of the classes of W.
inline double averaged_energy(const StepKernel& w, const Partition& groups) {
  const auto gm = groups.class_measures(w.partition());
  const Matrix s = group_sums(w.mass_matrix(), groups);
  double e = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) {
      const double area = gm[i] * gm[j];
      if (area > 0.0) e += s(i, j) * s(i, j) / area;
    }
  return e;
}

}  // namespace detail

/// W_P for P a grouping of the classes of W, written over W's own classes.
inline StepKernel average(const StepKernel& w, const Partition& groups) {
  return StepKernel(w.partition(), detail::average_values(w.values(), w.partition(), groups), w.bound());
}

/// W_P for an interval partition P, written over P. W is first refined when
/// its partition does not refine P.
inline StepKernel average(const StepKernel& w, const IntervalPartition& p) {
  const auto [aligned, groups] = align_to(w, p);
  const auto gm = groups.class_measures(aligned.partition());
  return StepKernel(p, detail::group_means(aligned.mass_matrix(), groups, gm), w.bound());
}

inline ColoredDigraphon average(const ColoredDigraphon& w, const Partition& groups) {
  std::vector<Matrix> blocks;
  blocks.reserve(w.blocks().size());
  for (const auto& b : w.blocks()) blocks.push_back(detail::average_values(b, w.partition(), groups));
  return ColoredDigraphon(w.k(), w.partition(), std::move(blocks));
}

inline ColoredDigraphon average(const ColoredDigraphon& w, const IntervalPartition& p) {
  const auto r = common_refinement(w.partition(), p);
  const auto refined = w.rebase(r.partition);
  const Partition groups(r.second, p.size());
  const auto gm = groups.class_measures(r.partition);
  std::vector<Matrix> blocks;
  for (const auto& b : refined.blocks()) {
    const StepKernel k(r.partition, b, 1.0);
    blocks.push_back(detail::group_means(k.mass_matrix(), groups, gm));
  }
  return ColoredDigraphon(w.k(), p, std::move(blocks));
}

/// Collapses every non-empty group into one class (groups that are not
/// consecutive are rearranged, which no norm can see).
inline StepKernel merge_classes(const StepKernel& w, const Partition& groups) {
  const Partition canon = groups.canonical();
  const auto gm = canon.class_measures(w.partition());
  std::vector<double> measures = gm;
  measures.back() = 1.0 - std::accumulate(measures.begin(), measures.end() - 1, 0.0);
  return StepKernel(IntervalPartition(measures), detail::group_means(w.mass_matrix(), canon, gm), w.bound());
}

// ---------------------------------------------------------------------------
// configuration and results

struct RegularityConfig {
  double epsilon = 0.1;
  std::size_t m0 = 1;
  std::optional<std::size_t> max_iterations;  ///< default ceil(k^4 / eps^2)
  Mode oracle_mode = Mode::exact;
  bool equipartition = false;
  /// Constant c of the equipartition rounding unit c / t; default eps^2 / (14 k^6).
  std::optional<double> granularity;
  std::size_t class_cap = 4096;
  std::size_t exhaustive_q_classes = 3;  ///< violating-partition search is exhaustive up to this many classes
  std::size_t exhaustive_q_atoms = 12;   ///< ... and this many kernel classes
  std::size_t q_restarts = 32;
  CutNormOptions cut;                    ///< seed, restarts, threads and exact limit of the cut oracles
};

struct RegularityResult {
  IntervalPartition atoms = IntervalPartition::trivial();  ///< classes of the (possibly refined) input
  Partition partition;                 ///< grouping of `atoms` into the output classes
  std::size_t iterations = 0;
  std::vector<double> energy_trace;    ///< ||W_R_i||_2^2 for i = 0..iterations
  double certified_residual = 0.0;     ///< oracle value on the output partition
  double threshold = 0.0;              ///< residual bound of the postcondition
  bool certified = false;              ///< residual <= threshold according to the oracle
  bool exhaustive = false;             ///< the final oracle call was exhaustive
  bool hit_iteration_cap = false;
  double increment_threshold = 0.0;
  bool increments_ok = true;           ///< every accepted step beat increment_threshold
  std::string note;

  std::size_t classes() const { return partition.nonempty_classes(); }
  std::vector<double> class_measures() const { return partition.canonical().class_measures(atoms); }
  std::vector<double> increments() const {
    std::vector<double> d;
    for (std::size_t i = 1; i < energy_trace.size(); ++i) d.push_back(energy_trace[i] - energy_trace[i - 1]);
    return d;
  }
};

namespace detail {

inline void check_config(const RegularityConfig& cfg) {
  detail::require(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0, "epsilon must lie in (0, 1]");
  detail::require(cfg.m0 >= 1, "m0 must be at least 1");
}

inline std::size_t default_iterations(double eps, std::size_t k) {
  const double k4 = std::pow(static_cast<double>(k), 4.0);
  return static_cast<std::size_t>(std::ceil(k4 / (eps * eps) - 1e-9));
}

inline void check_cap(const Partition& p, std::size_t cap) {
  if (p.classes() > cap)
    throw GuardError("D-11", "class-count cap exceeded: " + std::to_string(p.classes()) + " > " + std::to_string(cap));
}

inline double total_energy(std::span<const StepKernel> comps, const Partition& groups) {
  double e = 0.0;
  for (const auto& c : comps) e += averaged_energy(c, groups);
  return e;
}

inline std::vector<StepKernel> components_of(const ColoredDigraphon& w) {
  std::vector<StepKernel> out;
  for (std::size_t a = 0; a < w.k(); ++a)
    for (std::size_t b = 0; b < w.k(); ++b) out.push_back(w.component(a, b));
  return out;
}

/// Frieze-Kannan loop over a family of kernels on common atoms. Stops when
/// the summed residual cut norms are at most `threshold`; otherwise splits by
/// the witness of the worst component.
inline RegularityResult weak_loop(std::span<const StepKernel> comps, double threshold, std::size_t cap_iterations,
                                  double increment_threshold, const RegularityConfig& cfg) {
  const IntervalPartition& atoms = comps.front().partition();
  RegularityResult res;
  res.atoms = atoms;
  res.partition = Partition::trivial(atoms.size());
  res.threshold = threshold;
  res.increment_threshold = increment_threshold;
  res.energy_trace.push_back(total_energy(comps, res.partition));
  for (;;) {
    double total = 0.0;
    double worst = -1.0;
    CutWitness witness;
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const StepKernel residual = comps[c] - average(comps[c], res.partition);
      CutNormOptions o = cfg.cut;
      o.seed = derive_seed(cfg.cut.seed, Stream::regularity, res.iterations * comps.size() + c);
      const auto r = cut_norm(residual, cfg.oracle_mode, o);
      total += r.value;
      if (r.value > worst + kTieTolerance) {
        worst = r.value;
        witness = r.witness;
      }
    }
    res.certified_residual = total;
    res.exhaustive = cfg.oracle_mode == Mode::exact;
    if (total <= threshold) {
      res.certified = true;
      return res;
    }
    if (res.iterations >= cap_iterations) {
      res.hit_iteration_cap = true;
      res.note = "iteration cap reached with residual " + std::to_string(total) + " > " + std::to_string(threshold);
      return res;
    }
    const std::vector<SplitPair> split{{witness.S, witness.T}};
    res.partition = common_refinement(res.partition, res.partition, split).partition;
    check_cap(res.partition, cfg.class_cap);
    ++res.iterations;
    res.energy_trace.push_back(total_energy(comps, res.partition));
    const double inc = res.energy_trace.back() - res.energy_trace[res.energy_trace.size() - 2];
    if (!(inc > increment_threshold)) res.increments_ok = false;
  }
}

}  // namespace detail

/// Weak regularity partition of a kernel: a grouping P of its classes with
/// ||W - W_P||_box <= eps ||W||_2 according to the cut-norm oracle. Every
/// refinement raises ||W_P||_2^2 by more than eps^2 ||W||_2^2, so at most
/// 1/eps^2 steps happen.
inline RegularityResult weak_regularity(const StepKernel& w, const RegularityConfig& cfg) {
  detail::check_config(cfg);
  const double norm2 = l2_norm(w);
  const double thr = cfg.epsilon * norm2;
  const std::vector<StepKernel> comps{w};
  return detail::weak_loop(comps, thr, cfg.max_iterations.value_or(detail::default_iterations(cfg.epsilon, 1)),
                           thr * thr, cfg);
}

/// Colored version: the sum over (a,b) of the residual cut norms is at most
/// eps. Splitting by the worst component raises the energy by more than
/// (eps/k^2)^2, so at most k^4/eps^2 steps happen. Groupings of I_n classes
/// stay I_n-partitions.
inline RegularityResult weak_regularity_colored(const ColoredDigraphon& w, const RegularityConfig& cfg) {
  detail::check_config(cfg);
  const auto comps = detail::components_of(w);
  const double k2 = static_cast<double>(w.k() * w.k());
  const double inc = (cfg.epsilon / k2) * (cfg.epsilon / k2);
  return detail::weak_loop(comps, cfg.epsilon,
                           cfg.max_iterations.value_or(detail::default_iterations(cfg.epsilon, w.k())), inc, cfg);
}

// ---------------------------------------------------------------------------
// violating-partition oracle

/// Best violation found: a grouping Q, a component and sets S, T.
struct Violation {
  double value = -1.0;               ///< sum over Q-blocks of |integral over (S x T)| for `component`
  std::size_t component = 0;
  Partition Q;
  std::vector<std::size_t> S, T;
  double residual = 0.0;             ///< largest colored cut-Q-norm sum seen over the searched Q
  bool exhaustive = false;
};

namespace detail {

inline void consider(Violation& best, double value, std::size_t component, const Partition& q,
                     std::vector<std::size_t> S, std::vector<std::size_t> T) {
  if (value > best.value + kTieTolerance) {
    best.value = value;
    best.component = component;
    best.Q = q;
    best.S = std::move(S);
    best.T = std::move(T);
  }
}

/// Local search for one component: node moves between Q classes and
/// toggles of S and T membership, each accepted when it increases the sum of
/// absolute block integrals. Block updates are incremental.
class QSearch {
 public:
  QSearch(const Matrix& mass, std::size_t classes) : d_(mass), t_(mass.rows()), c_(classes) {}

  struct State {
    std::vector<std::size_t> label;
    std::vector<char> in_s, in_t;
    double value = 0.0;
  };

  State run(std::vector<std::size_t> label, std::vector<char> in_s, std::vector<char> in_t) {
    label_ = std::move(label);
    s_ = std::move(in_s);
    tt_ = std::move(in_t);
    rebuild();
    for (int sweep = 0; sweep < 100; ++sweep) {
      bool improved = false;
      for (std::size_t a = 0; a < t_; ++a) {
        const std::size_t p = label_[a];
        std::size_t best_q = p;
        double best_delta = kTieTolerance;
        for (std::size_t q = 0; q < c_; ++q) {
          if (q == p) continue;
          const double delta = move_delta(a, p, q);
          if (delta > best_delta) {
            best_delta = delta;
            best_q = q;
          }
        }
        if (best_q != p) {
          apply_move(a, p, best_q);
          improved = true;
        }
        if (toggle_delta(a, true) > kTieTolerance) {
          apply_toggle(a, true);
          improved = true;
        }
        if (toggle_delta(a, false) > kTieTolerance) {
          apply_toggle(a, false);
          improved = true;
        }
      }
      if (!improved) break;
    }
    State st{label_, s_, tt_, 0.0};
    st.value = objective();
    return st;
  }

 private:
  double& b(std::size_t i, std::size_t j) { return block_[i * c_ + j]; }

  double objective() const {
    double v = 0.0;
    for (double x : block_) v += std::abs(x);
    return v;
  }

  // row_[a*c + j]: sum of D(a, b) over b in T with label j, b != a
  // col_[a*c + i]: sum of D(b, a) over b in S with label i, b != a
  void rebuild() {
    block_.assign(c_ * c_, 0.0);
    row_.assign(t_ * c_, 0.0);
    col_.assign(t_ * c_, 0.0);
    for (std::size_t a = 0; a < t_; ++a)
      for (std::size_t x = 0; x < t_; ++x) {
        if (x == a) continue;
        if (tt_[x]) row_[a * c_ + label_[x]] += d_(a, x);
        if (s_[x]) col_[a * c_ + label_[x]] += d_(x, a);
      }
    for (std::size_t a = 0; a < t_; ++a)
      for (std::size_t x = 0; x < t_; ++x)
        if (s_[a] && tt_[x]) b(label_[a], label_[x]) += d_(a, x);
  }

  // Sum of |.| change over rows p, q and columns p, q when a moves p -> q.
  double move_delta(std::size_t a, std::size_t p, std::size_t q) {
    scratch_.clear();
    auto touch = [&](std::size_t i, std::size_t j, double add) {
      for (auto& e : scratch_)
        if (e.i == i && e.j == j) {
          e.add += add;
          return;
        }
      scratch_.push_back({i, j, add});
    };
    if (s_[a])
      for (std::size_t j = 0; j < c_; ++j) {
        const double r = row_[a * c_ + j];
        if (r != 0.0) {
          touch(p, j, -r);
          touch(q, j, r);
        }
      }
    if (tt_[a])
      for (std::size_t i = 0; i < c_; ++i) {
        const double cc = col_[a * c_ + i];
        if (cc != 0.0) {
          touch(i, p, -cc);
          touch(i, q, cc);
        }
      }
    if (s_[a] && tt_[a]) {
      touch(p, p, -d_(a, a));
      touch(q, q, d_(a, a));
    }
    double delta = 0.0;
    for (const auto& e : scratch_) delta += std::abs(b(e.i, e.j) + e.add) - std::abs(b(e.i, e.j));
    return delta;
  }

  void apply_move(std::size_t a, std::size_t p, std::size_t q) {
    if (s_[a])
      for (std::size_t j = 0; j < c_; ++j) {
        b(p, j) -= row_[a * c_ + j];
        b(q, j) += row_[a * c_ + j];
      }
    if (tt_[a])
      for (std::size_t i = 0; i < c_; ++i) {
        b(i, p) -= col_[a * c_ + i];
        b(i, q) += col_[a * c_ + i];
      }
    if (s_[a] && tt_[a]) {
      b(p, p) -= d_(a, a);
      b(q, q) += d_(a, a);
    }
    for (std::size_t x = 0; x < t_; ++x) {
      if (x == a) continue;
      if (tt_[a]) {
        row_[x * c_ + p] -= d_(x, a);
        row_[x * c_ + q] += d_(x, a);
      }
      if (s_[a]) {
        col_[x * c_ + p] -= d_(a, x);
        col_[x * c_ + q] += d_(a, x);
      }
    }
    label_[a] = q;
  }

  // Toggle membership of a in S (row side) or T (column side).
  double toggle_delta(std::size_t a, bool row_side) {
    const std::size_t p = label_[a];
    const double sign = (row_side ? s_[a] : tt_[a]) ? -1.0 : 1.0;
    const bool other = row_side ? tt_[a] : s_[a];
    double delta = 0.0;
    for (std::size_t j = 0; j < c_; ++j) {
      double add = sign * (row_side ? row_[a * c_ + j] : col_[a * c_ + j]);
      if (j == p && other) add += sign * d_(a, a);
      const double cur = row_side ? b(p, j) : b(j, p);
      delta += std::abs(cur + add) - std::abs(cur);
    }
    return delta;
  }

  void apply_toggle(std::size_t a, bool row_side) {
    const std::size_t p = label_[a];
    const double sign = (row_side ? s_[a] : tt_[a]) ? -1.0 : 1.0;
    const bool other = row_side ? tt_[a] : s_[a];
    for (std::size_t j = 0; j < c_; ++j) {
      double add = sign * (row_side ? row_[a * c_ + j] : col_[a * c_ + j]);
      if (j == p && other) add += sign * d_(a, a);
      (row_side ? b(p, j) : b(j, p)) += add;
    }
    for (std::size_t x = 0; x < t_; ++x) {
      if (x == a) continue;
      if (row_side) col_[x * c_ + p] += sign * d_(a, x);
      else row_[x * c_ + p] += sign * d_(x, a);
    }
    (row_side ? s_[a] : tt_[a]) = sign > 0.0;
  }

  struct Touch {
    std::size_t i, j;
    double add;
  };

  const Matrix& d_;
  std::size_t t_, c_;
  std::vector<std::size_t> label_;
  std::vector<char> s_, tt_;
  std::vector<double> block_, row_, col_;
  std::vector<Touch> scratch_;
};

/// Upper bound on the cut-Q-norm of `mass`. Letting T depend on the row
/// class only helps, and then |m(S_i, T_j)| is at most the larger of the
/// positive and negative parts of m(S_i, b) over b in Q_j. Each S_i ranges
/// over subsets of Q_i independently. The same holds with rows and columns
/// exchanged; the smaller bound is returned.
inline double cut_q_upper_bound(const Matrix& mass, const Partition& q, const std::vector<std::vector<std::size_t>>& members) {
  const std::size_t t = mass.rows(), g = q.classes();
  double rows = 0.0, cols = 0.0;
  std::vector<double> r(t), c(t), pr(g), nr(g), pc(g), nc(g);
  for (const auto& group : members) {
    double best_r = 0.0, best_c = 0.0;
    std::fill(r.begin(), r.end(), 0.0);
    std::fill(c.begin(), c.end(), 0.0);
    std::uint64_t gray = 0;
    for (std::uint64_t step = 1; step < (std::uint64_t{1} << group.size()); ++step) {
      const auto bit = static_cast<std::size_t>(__builtin_ctzll(step));
      gray ^= std::uint64_t{1} << bit;
      const double sign = ((gray >> bit) & 1U) ? 1.0 : -1.0;
      const std::size_t a = group[bit];
      std::fill(pr.begin(), pr.end(), 0.0);
      std::fill(nr.begin(), nr.end(), 0.0);
      std::fill(pc.begin(), pc.end(), 0.0);
      std::fill(nc.begin(), nc.end(), 0.0);
      for (std::size_t b = 0; b < t; ++b) {
        r[b] += sign * mass(a, b);
        c[b] += sign * mass(b, a);
        const std::size_t j = q.label(b);
        pr[j] += std::max(r[b], 0.0);
        nr[j] += std::max(-r[b], 0.0);
        pc[j] += std::max(c[b], 0.0);
        nc[j] += std::max(-c[b], 0.0);
      }
      double vr = 0.0, vc = 0.0;
      for (std::size_t j = 0; j < g; ++j) {
        vr += std::max(pr[j], nr[j]);
        vc += std::max(pc[j], nc[j]);
      }
      best_r = std::max(best_r, vr);
      best_c = std::max(best_c, vc);
    }
    rows += best_r;
    cols += best_c;
  }
  return std::min(rows, cols);
}

/// Exhaustive search over groupings of the atoms into exactly `classes`
/// non-empty classes. Refinement never decreases a cut-Q-norm, so exactly
/// min(c, t) classes cover every Q with at most c classes.
///
/// Every grouping first gets the cheap upper bound above. Candidates are then
/// evaluated in decreasing order of their bound until no remaining bound can
/// reach the best value, once for the best single component and once for
/// the colored sum. Ties within 1e-12 go to the grouping enumerated first
/// (then the lower component), so the outcome matches a plain scan.
inline void exhaustive_q_search(std::span<const Matrix> masses, std::size_t classes, const CutNormOptions& opts,
                                Violation& best) {
  const std::size_t t = masses.front().rows();
  const std::size_t comps = masses.size();
  detail::check_exact_limit(t, opts.exact_limit, "exhaustive cut-Q search");
  std::vector<Partition> groupings;
  std::vector<double> ub;  // ub[q * comps + c]
  for_each_set_partition(t, classes, [&](const Partition& q) {
    const auto members = q.members();
    for (std::size_t c = 0; c < comps; ++c) ub.push_back(cut_q_upper_bound(masses[c], q, members));
    groupings.push_back(q);
    return true;
  });
  if (groupings.empty()) return;
  std::vector<double> value(ub.size(), -1.0);
  auto eval = [&](std::size_t idx) {
    if (value[idx] < 0.0) value[idx] = cut_p_value_scan(masses[idx % comps], groupings[idx / comps]);
    return value[idx];
  };
  auto by_bound = [](const std::vector<double>& key) {
    std::vector<std::size_t> order(key.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    return order;
  };

  // Best single (grouping, component).
  double top = -1.0;
  std::size_t winner = 0;
  for (std::size_t idx : by_bound(ub)) {
    if (ub[idx] < top - kTieTolerance) break;
    const double v = eval(idx);
    if (v > top + kTieTolerance || (v >= top - kTieTolerance && idx < winner)) {
      if (v > top) top = v;
      winner = idx;
    }
  }

  // Largest colored sum over groupings. No component exceeds `top`.
  std::vector<double> ub_sum(groupings.size(), 0.0);
  for (std::size_t i = 0; i < ub.size(); ++i) ub_sum[i / comps] += std::min(ub[i], top + kTieTolerance);
  double residual = 0.0;
  for (std::size_t q : by_bound(ub_sum)) {
    if (ub_sum[q] <= residual) break;
    double sum = 0.0;
    for (std::size_t c = 0; c < comps; ++c) sum += eval(q * comps + c);
    residual = std::max(residual, sum);
  }

  const Partition& q = groupings[winner / comps];
  auto r = cut_p_norm_exact(masses[winner % comps], q, opts);
  consider(best, r.value, winner % comps, q, std::move(r.witness.S), std::move(r.witness.T));
  best.residual = std::max(best.residual, residual);
}

inline std::vector<std::size_t> all_atoms(std::size_t t) {
  std::vector<std::size_t> v(t);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

/// Searches for Q with at most `classes` classes, a component and S, T
/// maximizing the blockwise residual. `current` seeds one local-search
/// restart.
inline Violation find_violation(std::span<const Matrix> masses, std::size_t classes, const Partition& current,
                                const RegularityConfig& cfg, std::uint64_t seed) {
  const std::size_t t = masses.front().rows();
  const std::size_t c = std::min(classes, t);
  Violation best;
  best.residual = 0.0;
  if (c == t) {
    // Q discrete: every atom is its own class and S = T = everything is optimal.
    const auto q = Partition::discrete(t);
    double sum = 0.0;
    for (std::size_t k = 0; k < masses.size(); ++k) {
      double v = 0.0;
      for (double x : masses[k].data()) v += std::abs(x);
      sum += v;
      consider(best, v, k, q, all_atoms(t), all_atoms(t));
    }
    best.residual = sum;
    best.exhaustive = true;
    return best;
  }
  CutNormOptions exact_opts = cfg.cut;
  exact_opts.threads = 1;
  if (c <= cfg.exhaustive_q_classes && t <= cfg.exhaustive_q_atoms && cfg.oracle_mode == Mode::exact) {
    exhaustive_q_search(masses, c, exact_opts, best);
    best.exhaustive = true;
    return best;
  }
  // Local search, plus the exhaustive small-Q search where it is affordable.
  if (t <= cfg.exhaustive_q_atoms && cfg.oracle_mode == Mode::exact)
    exhaustive_q_search(masses, std::min(cfg.exhaustive_q_classes, c), exact_opts, best);
  const std::size_t restarts = std::max<std::size_t>(1, cfg.q_restarts);
  std::vector<Violation> per(masses.size() * restarts);
  parallel_for(per.size(), cfg.cut.threads, [&](std::size_t job) {
    const std::size_t comp = job / restarts, r = job % restarts;
    Rng rng(seed, Stream::regularity, job);
    std::vector<std::size_t> label(t);
    std::vector<char> s(t), tt(t);
    if (r == 0) {
      const Partition canon = current.canonical();
      for (std::size_t a = 0; a < t; ++a) label[a] = canon.label(a) % c;
      std::fill(s.begin(), s.end(), 1);
      std::fill(tt.begin(), tt.end(), 1);
    } else {
      for (auto& l : label) l = rng.below(c);
      for (auto& x : s) x = rng.coin();
      for (auto& x : tt) x = rng.coin();
    }
    QSearch search(masses[comp], c);
    const auto st = search.run(std::move(label), std::move(s), std::move(tt));
    Violation v;
    v.value = st.value;
    v.component = comp;
    v.Q = Partition(st.label, c);
    for (std::size_t a = 0; a < t; ++a) {
      if (st.in_s[a]) v.S.push_back(a);
      if (st.in_t[a]) v.T.push_back(a);
    }
    // Re-optimize S, T exactly for the Q found when that is cheap.
    if (t <= cfg.cut.exact_limit && c <= 5 && cfg.oracle_mode == Mode::exact) {
      CutNormOptions o = cfg.cut;
      o.threads = 1;
      auto exact = cut_p_norm_exact(masses[comp], v.Q, o);
      if (exact.value > v.value) {
        v.value = exact.value;
        v.S = std::move(exact.witness.S);
        v.T = std::move(exact.witness.T);
      }
    }
    per[job] = std::move(v);
  });
  for (auto& v : per) consider(best, v.value, v.component, v.Q, v.S, v.T);
  // Colored cut-Q-norm residual for the winning Q.
  double sum = 0.0;
  for (std::size_t comp = 0; comp < masses.size(); ++comp) {
    CutNormOptions o = cfg.cut;
    o.threads = 1;
    o.seed = derive_seed(seed, Stream::regularity, 1'000'000 + comp);
    const bool exact = t <= cfg.cut.exact_limit && best.Q.classes() <= 5 && cfg.oracle_mode == Mode::exact;
    sum += exact ? cut_p_norm_exact(masses[comp], best.Q, o).value : cut_p_norm_heuristic(masses[comp], best.Q, o).value;
  }
  best.residual = std::max(best.residual, sum);
  best.exhaustive = false;
  return best;
}

/// Splits classes of q until it has `target` non-empty classes (when the
/// ground set allows it). Refining Q never lowers a cut-Q-norm.
inline Partition pad_classes(const Partition& q, std::size_t target) {
  Partition canon = q.canonical();
  std::vector<std::size_t> labels(canon.labels().begin(), canon.labels().end());
  std::size_t classes = canon.classes();
  while (classes < target && classes < labels.size()) {
    const auto sizes = Partition(labels, classes).class_sizes();
    const auto big = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (std::size_t a = labels.size(); a-- > 0;)
      if (labels[a] == big) {
        labels[a] = classes++;
        break;
      }
  }
  return Partition(std::move(labels), classes);
}

inline std::vector<Matrix> residual_masses(std::span<const StepKernel> comps, const Partition& groups) {
  std::vector<Matrix> out;
  out.reserve(comps.size());
  for (const auto& c : comps) out.push_back((c - average(c, groups)).mass_matrix());
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// equipartition rounding

struct RoundedPartition {
  IntervalPartition partition = IntervalPartition::trivial();
  std::vector<double> symmetric_difference;  ///< lambda(P_i triangle S_i) per class
  double total_symmetric_difference = 0.0;
};

namespace detail {

inline std::size_t unit_count(double unit) {
  detail::require(unit > 0.0 && unit <= 1.0, "rounding unit must lie in (0, 1]");
  const double inv = 1.0 / unit;
  const double r = std::round(inv);
  if (std::abs(inv - r) > 1e-9 * std::max(1.0, r))
    throw InvalidArgument("infeasible unit: 1/unit = " + std::to_string(inv) + " is not an integer");
  return static_cast<std::size_t>(r);
}

/// Measure of the intersection of [a0, a1) and [b0, b1).
inline double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace detail

/// Moves every breakpoint of P to the nearest multiple of `unit`. Class i
/// becomes S_i = [B_(i-1), B_i); every measure is then a multiple of unit and
/// sum_i lambda(P_i triangle S_i) <= (t - 1) unit.
inline RoundedPartition equipartition_round(const IntervalPartition& p, double unit) {
  const std::size_t n = detail::unit_count(unit);
  detail::require(unit * static_cast<double>(p.size()) <= 1.0 + 1e-12, "infeasible unit: unit * t exceeds 1");
  const auto b = p.breakpoints();
  std::vector<std::size_t> cuts(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) cuts[i] = static_cast<std::size_t>(std::llround(b[i] * static_cast<double>(n)));
  cuts.front() = 0;
  cuts.back() = n;
  std::vector<std::size_t> units(p.size());
  RoundedPartition out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    units[i] = cuts[i + 1] - cuts[i];
    const double s0 = static_cast<double>(cuts[i]) / static_cast<double>(n);
    const double s1 = static_cast<double>(cuts[i + 1]) / static_cast<double>(n);
    const double d = (b[i + 1] - b[i]) + (s1 - s0) - 2.0 * detail::overlap(b[i], b[i + 1], s0, s1);
    out.symmetric_difference.push_back(std::max(0.0, d));
    out.total_symmetric_difference += out.symmetric_difference.back();
  }
  out.partition = IntervalPartition::from_units(std::move(units), n);
  return out;
}

struct Claim4Report {
  double l1_difference = 0.0;        ///< ||W_P - W_S||_1
  double symmetric_difference = 0.0; ///< sum_i lambda(P_i triangle S_i)
  double ratio = 0.0;                ///< l1_difference / symmetric_difference (0 when both vanish)
  bool holds = true;                 ///< l1_difference <= 7 * symmetric_difference + 1e-9
};

/// Checks ||W_P - W_S||_1 <= 7 sum_i lambda(P_i triangle S_i) for two
/// labelled groupings of the classes of W (class i of P is matched with
/// class i of S). Needs |W| <= 1.
inline Claim4Report claim4_check(const StepKernel& w, const Partition& p, const Partition& s) {
  detail::require(w.values().max_abs() <= 1.0 + kValueTolerance, "the bound needs |W| <= 1");
  detail::require(p.size() == w.classes() && s.size() == w.classes(), "groupings must label every class");
  const auto wp = average(w, p), ws = average(w, s);
  Claim4Report r;
  r.l1_difference = l1_norm(wp - ws);
  const std::size_t l = std::max(p.classes(), s.classes());
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t a = 0; a < w.classes(); ++a) {
      const bool in_p = i < p.classes() && p.label(a) == i;
      const bool in_s = i < s.classes() && s.label(a) == i;
      if (in_p != in_s) r.symmetric_difference += w.measure(a);
    }
  r.ratio = r.symmetric_difference > 0.0 ? r.l1_difference / r.symmetric_difference : 0.0;
  r.holds = r.l1_difference <= 7.0 * r.symmetric_difference + 1e-9;
  return r;
}

/// Interval version: W, P and S are written over their common refinement.
inline Claim4Report claim4_check(const StepKernel& w, const IntervalPartition& p, const IntervalPartition& s) {
  const auto r1 = common_refinement(w.partition(), p);
  const auto r2 = common_refinement(r1.partition, s);
  std::vector<std::size_t> lp(r2.partition.size());
  for (std::size_t a = 0; a < lp.size(); ++a) lp[a] = r1.second[r2.first[a]];
  return claim4_check(w.rebase(r2.partition), Partition(std::move(lp), p.size()), Partition(r2.second, s.size()));
}

namespace detail {

/// Piece of an atom, as an interval of [0,1].
struct Piece {
  double lo, hi;
  std::size_t cls;
};

/// Rounds the class measures of a grouping to multiples of 1/n (largest
/// remainder), moving the surplus tail of shrinking classes into growing
/// ones, then cuts every class into pieces of measure exactly 1/n. Returns
/// the new atoms and the grouping of them into n equal classes.
inline std::pair<IntervalPartition, Partition> equalize(const IntervalPartition& atoms, const Partition& groups,
                                                       std::size_t n, double& moved) {
  const Partition canon = groups.canonical();
  const std::size_t g = canon.classes();
  const auto meas = canon.class_measures(atoms);
  const double unit = 1.0 / static_cast<double>(n);
  std::vector<std::size_t> target(g);
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t i = 0; i < g; ++i) {
    const double x = meas[i] / unit;
    target[i] = static_cast<std::size_t>(std::floor(x + 1e-9));
    used += target[i];
    rema.emplace_back(x - static_cast<double>(target[i]), i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; used < n && r < rema.size(); ++r, ++used) ++target[rema[r].second];
  detail::require(used == n, "equipartition rounding failed to distribute units");

  const auto bp = atoms.breakpoints();
  std::vector<std::vector<Piece>> members(g);
  for (std::size_t a = 0; a < atoms.size(); ++a)
    if (bp[a + 1] > bp[a]) members[canon.label(a)].push_back({bp[a], bp[a + 1], canon.label(a)});
  // Keep the first target * unit of every class; release the rest.
  std::vector<Piece> released;
  std::vector<std::vector<Piece>> kept(g);
  for (std::size_t i = 0; i < g; ++i) {
    double room = static_cast<double>(target[i]) * unit;
    for (const auto& pc : members[i]) {
      const double len = pc.hi - pc.lo;
      if (len <= room + kMeasureTolerance) {
        kept[i].push_back(pc);
        room -= len;
      } else if (room > kMeasureTolerance) {
        kept[i].push_back({pc.lo, pc.lo + room, i});
        released.push_back({pc.lo + room, pc.hi, i});
        room = 0.0;
      } else {
        released.push_back(pc);
      }
    }
  }
  moved = 0.0;
  for (const auto& pc : released) moved += pc.hi - pc.lo;
  // Hand released pieces to classes below target, in class order.
  std::size_t ri = 0;
  for (std::size_t i = 0; i < g; ++i) {
    double have = 0.0;
    for (const auto& pc : kept[i]) have += pc.hi - pc.lo;
    double need = static_cast<double>(target[i]) * unit - have;
    while (need > kMeasureTolerance && ri < released.size()) {
      Piece& pc = released[ri];
      const double len = pc.hi - pc.lo;
      if (len <= need + kMeasureTolerance) {
        kept[i].push_back({pc.lo, pc.hi, i});
        need -= len;
        ++ri;
      } else {
        kept[i].push_back({pc.lo, pc.lo + need, i});
        pc.lo += need;
        need = 0.0;
      }
    }
  }
  // Cut every class into pieces of measure unit, walking its pieces in order.
  std::vector<Piece> finals;
  std::size_t next_class = 0;
  for (std::size_t i = 0; i < g; ++i) {
    auto ps = kept[i];
    std::sort(ps.begin(), ps.end(), [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
    double room = unit;
    for (auto pc : ps) {
      while (pc.hi - pc.lo > kMeasureTolerance) {
        const double len = pc.hi - pc.lo;
        if (len <= room + kMeasureTolerance) {
          finals.push_back({pc.lo, pc.hi, next_class});
          room -= len;
          pc.lo = pc.hi;
        } else {
          finals.push_back({pc.lo, pc.lo + room, next_class});
          pc.lo += room;
          room = 0.0;
        }
        if (room <= kMeasureTolerance) {
          ++next_class;
          room = unit;
        }
      }
    }
  }
  std::sort(finals.begin(), finals.end(), [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
  std::vector<double> measures;
  std::vector<std::size_t> labels;
  for (const auto& pc : finals) {
    measures.push_back(pc.hi - pc.lo);
    labels.push_back(std::min(pc.cls, n - 1));
  }
  measures.back() = 1.0 - std::accumulate(measures.begin(), measures.end() - 1, 0.0);
  return {IntervalPartition(std::move(measures)), Partition(std::move(labels), n)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// cut-P regularity

namespace detail {

inline RegularityResult cut_p_loop(std::vector<StepKernel> comps, std::size_t k, const RegularityConfig& cfg) {
  check_config(cfg);
  const double k2 = static_cast<double>(k * k);
  const double k4 = k2 * k2;
  const double eps = cfg.epsilon;
  const double component_threshold = eps / k2;
  const std::size_t cap_iterations =
      cfg.max_iterations.value_or(cfg.equipartition ? 2 * default_iterations(eps, k) : default_iterations(eps, k));
  RegularityResult res;
  res.atoms = comps.front().partition();
  res.partition = Partition::trivial(res.atoms.size());
  res.threshold = eps;
  res.increment_threshold = cfg.equipartition ? eps * eps / (2.0 * k4) : eps * eps / k4;
  res.energy_trace.push_back(total_energy(comps, res.partition));
  for (;;) {
    const std::size_t c = std::max(res.partition.nonempty_classes(), cfg.m0);
    const auto masses = residual_masses(comps, res.partition);
    auto v = find_violation(masses, c, res.partition, cfg, derive_seed(cfg.cut.seed, Stream::regularity, res.iterations));
    res.certified_residual = v.residual;
    res.exhaustive = v.exhaustive;
    if (!(v.value > component_threshold)) {
      res.certified = true;
      if (!v.exhaustive) res.note = "no violating partition found by local search";
      return res;
    }
    if (res.iterations >= cap_iterations) {
      res.hit_iteration_cap = true;
      res.note = "iteration cap reached with violation " + std::to_string(v.value);
      return res;
    }
    Partition q = v.Q;
    if (res.iterations == 0) q = pad_classes(q, cfg.m0);
    const std::vector<SplitPair> split{{v.S, v.T}};
    Partition next = common_refinement(res.partition, q, split).partition;
    check_cap(next, cfg.class_cap);
    if (cfg.equipartition) {
      const double cst = cfg.granularity.value_or(eps * eps / (14.0 * std::pow(static_cast<double>(k), 6.0)));
      // Snap the unit c / t so that 1/unit is an integer.
      const double raw = cst / static_cast<double>(next.nonempty_classes());
      const auto n = static_cast<std::size_t>(std::ceil(1.0 / raw - 1e-9));
      if (n > cfg.class_cap)
        throw GuardError("D-11", "class-count cap exceeded: equipartition needs " + std::to_string(n) + " > " +
                                     std::to_string(cfg.class_cap) + " classes");
      double moved = 0.0;
      auto [atoms, groups] = equalize(res.atoms, next, n, moved);
      for (auto& comp : comps) comp = comp.rebase(atoms);
      res.atoms = std::move(atoms);
      next = std::move(groups);
    }
    res.partition = std::move(next);
    ++res.iterations;
    res.energy_trace.push_back(total_energy(comps, res.partition));
    const double inc = res.energy_trace.back() - res.energy_trace[res.energy_trace.size() - 2];
    if (!(inc > res.increment_threshold)) res.increments_ok = false;
  }
}

}  // namespace detail

/// Cut-P regularity partition of a colored digraphon: repeatedly search for
/// Q with at most max(t_R, m0) classes, a component (a,b) and sets S, T with
/// sum_ij |integral over (S cap Q_i) x (T cap Q_j) of W^(a,b) - W^(a,b)_R| >
/// eps/k^2, and refine R by Q and {S, T}. On exit no searched Q violates, so
/// ||W - W_R||_box,Q <= eps for them. Each step raises the energy by more
/// than eps^2/k^4 (eps^2/(2k^4) with equal-measure classes).
inline RegularityResult cut_p_regularity(const ColoredDigraphon& w, const RegularityConfig& cfg) {
  return detail::cut_p_loop(detail::components_of(w), w.k(), cfg);
}

/// Single-kernel path (k = 1) for graphons.
inline RegularityResult cut_p_regularity(const StepKernel& w, const RegularityConfig& cfg) {
  return detail::cut_p_loop({w}, 1, cfg);
}

/// Largest colored cut-Q-norm of W - W_R over every grouping Q of the atoms
/// into at most `classes` classes, by exhaustive enumeration (small inputs).
inline double exhaustive_cut_q_residual(std::span<const StepKernel> comps, const Partition& groups,
                                        std::size_t classes) {
  const auto masses = detail::residual_masses(comps, groups);
  const std::size_t t = masses.front().rows();
  Violation best;
  CutNormOptions o;
  detail::exhaustive_q_search(masses, std::min(classes, t), o, best);
  return best.residual;
}

}  // namespace graphlim
