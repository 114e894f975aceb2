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

#include <Eigen/Dense>

#include "graphlim/errors.hpp"
#include "graphlim/graph.hpp"
#include "graphlim/kernel.hpp"
#include "graphlim/matrix.hpp"
#include "graphlim/parallel.hpp"
#include "graphlim/partition.hpp"
#include "graphlim/rng.hpp"

namespace graphlim {

inline constexpr double kNormTolerance = 1e-9;
inline constexpr double kTieTolerance = 1e-12;

enum class Mode { exact, heuristic };

inline const char* to_string(Mode m) { return m == Mode::exact ? "exact" : "heuristic"; }

struct CutNormOptions {
  std::size_t exact_limit = 20;  ///< largest class count handled by enumeration
  std::size_t restarts = 32;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Pair of class subsets attaining a cut value.
struct CutWitness {
  std::vector<std::size_t> S;
  std::vector<std::size_t> T;
  double value = 0.0;
};

struct CutResult {
  double value = 0.0;
  CutWitness witness;
};

/// |sum over S x T| of a block-integral matrix.
inline double cut_value(const Matrix& mass, std::span<const std::size_t> S, std::span<const std::size_t> T) {
  double s = 0.0;
  for (std::size_t i : S)
    for (std::size_t j : T) s += mass(i, j);
  return std::abs(s);
}

namespace detail {

inline std::vector<std::size_t> mask_to_set(std::uint64_t mask, std::size_t t) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < t; ++i)
    if ((mask >> i) & 1U) out.push_back(i);
  return out;
}

inline std::uint64_t set_to_mask(std::span<const std::size_t> set) {
  std::uint64_t m = 0;
  for (std::size_t i : set) m |= std::uint64_t{1} << i;
  return m;
}

/// Candidate optimum with the deterministic tie-break: larger value wins,
/// values within 1e-12 go to the numerically smallest (S, T) masks.
struct MaskCandidate {
  double value = -1.0;
  std::uint64_t S = 0;
  std::uint64_t T = 0;

  bool beats(const MaskCandidate& o) const {
    if (value > o.value + kTieTolerance) return true;
    if (value < o.value - kTieTolerance) return false;
    return S < o.S || (S == o.S && T < o.T);
  }
};

inline void check_exact_limit(std::size_t t, std::size_t limit, const std::string& what) {
  if (t > limit)
    throw GuardError("D-5", "exact-limit exceeded: t=" + std::to_string(t) + " > " + std::to_string(limit) + " (" +
                                what + "; use the heuristic mode)");
  if (t > 40) throw GuardError("D-5", "exact-limit exceeded: t=" + std::to_string(t) + " > 40");
}

/// Splits the 2^t subsets of [t] into chunks by their top bits; inside a
/// chunk the low bits run through a Gray code.
inline std::size_t chunk_bits(std::size_t t) { return std::min<std::size_t>(t, 6); }

}  // namespace detail

/// Exact cut norm of a block-integral matrix by enumerating S. For fixed S
/// the objective is linear in the indicator of T, so the best T collects
/// either all positive or all negative column sums. Relaxing the indicators
/// to [0,1] gives a bilinear function on a box, which attains its maximum at
/// a vertex; hence class subsets suffice and the result is the cut norm of
/// the step function.
inline CutResult cut_norm_exact(const Matrix& mass, const CutNormOptions& opts = {}) {
  const std::size_t t = mass.rows();
  detail::require(mass.square(), "cut norm needs a square matrix");
  detail::check_exact_limit(t, opts.exact_limit, "exact cut norm");
  if (t == 0) return {};
  const std::size_t high = detail::chunk_bits(t);
  const std::size_t low = t - high;
  const std::size_t chunks = std::size_t{1} << high;
  std::vector<detail::MaskCandidate> best(chunks);
  parallel_for(chunks, opts.threads, [&](std::size_t chunk) {
    const std::uint64_t top = static_cast<std::uint64_t>(chunk) << low;
    std::vector<double> col(t, 0.0);
    for (std::size_t i = 0; i < t; ++i)
      if ((top >> i) & 1U)
        for (std::size_t j = 0; j < t; ++j) col[j] += mass(i, j);
    detail::MaskCandidate local;
    std::uint64_t gray = 0;
    const std::uint64_t steps = std::uint64_t{1} << low;
    for (std::uint64_t step = 0; step < steps; ++step) {
      if (step > 0) {
        const auto bit = static_cast<std::size_t>(__builtin_ctzll(step));
        gray ^= std::uint64_t{1} << bit;
        const double sign = ((gray >> bit) & 1U) ? 1.0 : -1.0;
        for (std::size_t j = 0; j < t; ++j) col[j] += sign * mass(bit, j);
      }
      double pos = 0.0, neg = 0.0;
      std::uint64_t tpos = 0, tneg = 0;
      for (std::size_t j = 0; j < t; ++j) {
        if (col[j] > 0.0) {
          pos += col[j];
          tpos |= std::uint64_t{1} << j;
        } else if (col[j] < 0.0) {
          neg -= col[j];
          tneg |= std::uint64_t{1} << j;
        }
      }
      const std::uint64_t S = top | gray;
      const detail::MaskCandidate a{pos, pos > 0.0 ? S : 0, tpos};
      const detail::MaskCandidate b{neg, neg > 0.0 ? S : 0, tneg};
      if (a.beats(local)) local = a;
      if (b.beats(local)) local = b;
    }
    best[chunk] = local;
  });
  detail::MaskCandidate winner = best.front();
  for (const auto& c : best)
    if (c.beats(winner)) winner = c;
  CutResult r;
  r.witness.S = detail::mask_to_set(winner.S, t);
  r.witness.T = detail::mask_to_set(winner.T, t);
  r.witness.value = cut_value(mass, r.witness.S, r.witness.T);
  r.value = r.witness.value;
  return r;
}

inline CutResult cut_norm_exact(const StepKernel& w, const CutNormOptions& opts = {}) {
  return cut_norm_exact(w.mass_matrix(), opts);
}

/// Lower bound on the cut norm by alternating maximization: for fixed S the
/// best T takes the columns with positive (or, for the other sign, negative)
/// sums, and symmetrically for S. Each restart starts from a random S and
/// iterates to a fixed point.
inline CutResult cut_norm_heuristic(const Matrix& mass, const CutNormOptions& opts = {}) {
  detail::require(opts.restarts >= 1, "need at least one restart");
  detail::require(mass.square(), "cut norm needs a square matrix");
  const std::size_t t = mass.rows();
  if (t == 0) return {};
  struct Local {
    double value = -1.0;
    std::vector<char> S, T;
  };
  std::vector<Local> per(opts.restarts);
  parallel_for(opts.restarts, opts.threads, [&](std::size_t r) {
    Rng rng(opts.seed, Stream::cut_norm, r);
    std::vector<char> start(t);
    bool any = false;
    for (auto& s : start) any |= (s = rng.coin() ? 1 : 0) != 0;
    if (!any) std::fill(start.begin(), start.end(), 1);
    Local best;
    std::vector<double> acc(t);
    for (double sign : {1.0, -1.0}) {
      std::vector<char> S = start, T(t, 0);
      double value = -1.0;
      for (int iter = 0; iter < 200; ++iter) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < t; ++i)
          if (S[i])
            for (std::size_t j = 0; j < t; ++j) acc[j] += sign * mass(i, j);
        for (std::size_t j = 0; j < t; ++j) T[j] = acc[j] > 0.0;
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < t; ++i)
          for (std::size_t j = 0; j < t; ++j)
            if (T[j]) acc[i] += sign * mass(i, j);
        double v = 0.0;
        for (std::size_t i = 0; i < t; ++i) {
          S[i] = acc[i] > 0.0;
          if (S[i]) v += acc[i];
        }
        if (v <= value + kTieTolerance) break;
        value = v;
      }
      if (value > best.value + kTieTolerance) best = {value, S, T};
    }
    per[r] = std::move(best);
  });
  std::size_t win = 0;
  for (std::size_t r = 1; r < per.size(); ++r)
    if (per[r].value > per[win].value + kTieTolerance) win = r;
  CutResult res;
  for (std::size_t i = 0; i < t; ++i) {
    if (per[win].S[i]) res.witness.S.push_back(i);
    if (per[win].T[i]) res.witness.T.push_back(i);
  }
  if (res.witness.S.empty() || res.witness.T.empty()) res.witness.S.clear(), res.witness.T.clear();
  res.witness.value = cut_value(mass, res.witness.S, res.witness.T);
  res.value = res.witness.value;
  return res;
}

inline CutResult cut_norm_heuristic(const StepKernel& w, const CutNormOptions& opts = {}) {
  return cut_norm_heuristic(w.mass_matrix(), opts);
}

inline CutResult cut_norm(const StepKernel& w, Mode mode, const CutNormOptions& opts = {}) {
  return mode == Mode::exact ? cut_norm_exact(w, opts) : cut_norm_heuristic(w, opts);
}

/// Sum of the component cut norms of a family of kernels on one partition,
/// e.g. the differences W^(a,b) - U^(a,b) of two colored digraphons.
inline double cut_norm_sum(std::span<const StepKernel> parts, Mode mode, const CutNormOptions& opts = {}) {
  double s = 0.0;
  for (const auto& p : parts) s += cut_norm(p, mode, opts).value;
  return s;
}

/// Upper bound on the cut norm: the largest singular value of
/// lambda_i^(1/2) W_ij lambda_j^(1/2), i.e. the L2 operator norm of W.
/// Holds because the indicator of S has L2 norm at most 1.
inline double cut_norm_spectral_bound(const StepKernel& w) {
  const std::size_t t = w.classes();
  Eigen::MatrixXd b(t, t);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) b(i, j) = w.value(i, j) * std::sqrt(w.measure(i) * w.measure(j));
  if (t == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b);
  return svd.singularValues()(0);
}

inline double l1_norm(const StepKernel& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.classes(); ++i)
    for (std::size_t j = 0; j < w.classes(); ++j) s += std::abs(w.value(i, j)) * w.measure(i) * w.measure(j);
  return s;
}

inline double l2_norm_squared(const StepKernel& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.classes(); ++i)
    for (std::size_t j = 0; j < w.classes(); ++j) s += w.value(i, j) * w.value(i, j) * w.measure(i) * w.measure(j);
  return s;
}

inline double l2_norm(const StepKernel& w) { return std::sqrt(l2_norm_squared(w)); }

// ---------------------------------------------------------------------------
// cut-P-norm

/// t x t matrix with entries exactly +1 or -1.
struct SignPattern {
  std::size_t size = 0;
  std::vector<int> entries;

  int operator()(std::size_t i, std::size_t j) const { return entries[i * size + j]; }

  static SignPattern all_plus(std::size_t t) { return {t, std::vector<int>(t * t, 1)}; }
};

struct CutPResult {
  double value = 0.0;
  SignPattern pattern;
  CutWitness witness;            ///< class subsets of `atoms`
  IntervalPartition atoms = IntervalPartition::trivial();  ///< partition the witness indexes
};

/// Sum over P-blocks of |integral over (S x T) within the block|.
inline double cut_p_value(const Matrix& mass, const Partition& groups, std::span<const std::size_t> S,
                          std::span<const std::size_t> T) {
  const std::size_t g = groups.classes();
  Matrix block(g, g);
  for (std::size_t a : S)
    for (std::size_t b : T) block(groups.label(a), groups.label(b)) += mass(a, b);
  double s = 0.0;
  for (double v : block.data()) s += std::abs(v);
  return s;
}

/// The kernel multiplied blockwise by a sign pattern over a grouping of its classes.
inline StepKernel apply_sign_pattern(const StepKernel& w, const Partition& groups, const SignPattern& a) {
  Matrix v = w.values();
  for (std::size_t i = 0; i < w.classes(); ++i)
    for (std::size_t j = 0; j < w.classes(); ++j) v(i, j) *= a(groups.label(i), groups.label(j));
  return StepKernel(w.partition(), std::move(v), w.bound());
}

namespace detail {

inline SignPattern signs_of(const Matrix& mass, const Partition& groups, std::span<const std::size_t> S,
                            std::span<const std::size_t> T) {
  const std::size_t g = groups.classes();
  Matrix block(g, g);
  for (std::size_t a : S)
    for (std::size_t b : T) block(groups.label(a), groups.label(b)) += mass(a, b);
  SignPattern p{g, std::vector<int>(g * g, 1)};
  for (std::size_t i = 0; i < g * g; ++i) p.entries[i] = block.data()[i] < 0.0 ? -1 : 1;
  return p;
}

}  // namespace detail

/// Exact cut-P-norm where P is a grouping of the classes of `mass`. For each
/// S the blocks of one column group j are handled together: with c_b the
/// vector of row-group sums of column b, the best T within group j is the
/// set of b with sigma . c_b > 0 for the best sign vector sigma, because
/// sum_i |x_i| = max over sigma of sigma . x.
inline CutPResult cut_p_norm_exact(const Matrix& mass, const Partition& groups, const CutNormOptions& opts = {}) {
  const std::size_t t = mass.rows();
  const std::size_t g = groups.classes();
  detail::require(groups.size() == t, "grouping must label every class");
  detail::check_exact_limit(t, opts.exact_limit, "exact cut-P-norm");
  if (g > 5) throw GuardError("D-5", "exact-limit exceeded: t_P=" + std::to_string(g) + " > 5 (exact cut-P-norm)");
  CutPResult res;
  res.pattern = SignPattern::all_plus(g);
  if (t == 0) return res;
  const auto members = groups.members();
  const std::size_t high = detail::chunk_bits(t);
  const std::size_t low = t - high;
  const std::size_t chunks = std::size_t{1} << high;
  const std::size_t sigmas = std::size_t{1} << g;
  std::vector<detail::MaskCandidate> best(chunks);
  parallel_for(chunks, opts.threads, [&](std::size_t chunk) {
    const std::uint64_t top = static_cast<std::uint64_t>(chunk) << low;
    Matrix c(g, t);  // c(i, b) = sum over a in S within row group i of mass(a, b)
    for (std::size_t a = 0; a < t; ++a)
      if ((top >> a) & 1U)
        for (std::size_t b = 0; b < t; ++b) c(groups.label(a), b) += mass(a, b);
    detail::MaskCandidate local;
    std::uint64_t gray = 0;
    const std::uint64_t steps = std::uint64_t{1} << low;
    for (std::uint64_t step = 0; step < steps; ++step) {
      if (step > 0) {
        const auto bit = static_cast<std::size_t>(__builtin_ctzll(step));
        gray ^= std::uint64_t{1} << bit;
        const double sign = ((gray >> bit) & 1U) ? 1.0 : -1.0;
        const std::size_t row = groups.label(bit);
        for (std::size_t b = 0; b < t; ++b) c(row, b) += sign * mass(bit, b);
      }
      double total = 0.0;
      std::uint64_t tmask = 0;
      for (std::size_t j = 0; j < g; ++j) {
        double best_j = 0.0;
        std::uint64_t best_mask = 0;
        for (std::size_t sigma = 0; sigma < sigmas; ++sigma) {
          double v = 0.0;
          std::uint64_t m = 0;
          for (std::size_t b : members[j]) {
            double x = 0.0;
            for (std::size_t i = 0; i < g; ++i) x += ((sigma >> i) & 1U) ? -c(i, b) : c(i, b);
            if (x > 0.0) {
              v += x;
              m |= std::uint64_t{1} << b;
            }
          }
          if (v > best_j + kTieTolerance || (v > best_j - kTieTolerance && m < best_mask)) {
            best_j = v;
            best_mask = m;
          }
        }
        total += best_j;
        tmask |= best_mask;
      }
      const std::uint64_t S = top | gray;
      const detail::MaskCandidate cand{total, total > 0.0 ? S : 0, total > 0.0 ? tmask : 0};
      if (cand.beats(local)) local = cand;
    }
    best[chunk] = local;
  });
  detail::MaskCandidate winner = best.front();
  for (const auto& c : best)
    if (c.beats(winner)) winner = c;
  res.witness.S = detail::mask_to_set(winner.S, t);
  res.witness.T = detail::mask_to_set(winner.T, t);
  res.witness.value = cut_p_value(mass, groups, res.witness.S, res.witness.T);
  res.value = res.witness.value;
  res.pattern = detail::signs_of(mass, groups, res.witness.S, res.witness.T);
  return res;
}

namespace detail {

/// Value of the exact cut-P-norm without a witness. Same enumeration as
/// cut_p_norm_exact, but sigma and -sigma share one pass (they split each
/// column value into its positive and negative part) and the sign vectors
/// of a column are visited in Gray order, so each costs one addition.
inline double cut_p_value_scan(const Matrix& mass, const Partition& groups) {
  const std::size_t t = mass.rows();
  const std::size_t g = groups.classes();
  if (t == 0 || g == 0) return 0.0;
  const std::size_t half = std::size_t{1} << (g - 1);
  std::vector<double> m(t * t);
  for (std::size_t a = 0; a < t; ++a)
    for (std::size_t b = 0; b < t; ++b) m[a * t + b] = mass(a, b);
  std::vector<std::size_t> label(groups.labels().begin(), groups.labels().end());
  std::vector<std::size_t> flip(half, 0);  // row whose sign changes at Gray step h
  for (std::size_t h = 1; h < half; ++h) flip[h] = 1 + static_cast<std::size_t>(__builtin_ctzll(h));
  std::vector<double> c(g * t, 0.0);  // c[i * t + b]: sum over a in S within row group i of mass(a, b)
  std::vector<double> pos(g * half), neg(g * half);
  double best = 0.0;
  std::uint64_t gray = 0;
  const std::uint64_t steps = std::uint64_t{1} << t;
  for (std::uint64_t step = 0; step < steps; ++step) {
    if (step > 0) {
      const auto a = static_cast<std::size_t>(__builtin_ctzll(step));
      gray ^= std::uint64_t{1} << a;
      double* row = &c[label[a] * t];
      const double* src = &m[a * t];
      if ((gray >> a) & 1U)
        for (std::size_t b = 0; b < t; ++b) row[b] += src[b];
      else
        for (std::size_t b = 0; b < t; ++b) row[b] -= src[b];
    }
    std::fill(pos.begin(), pos.end(), 0.0);
    std::fill(neg.begin(), neg.end(), 0.0);
    for (std::size_t b = 0; b < t; ++b) {
      // Gray order over sigma with the sign of row 0 fixed to +.
      double x = 0.0;
      for (std::size_t i = 0; i < g; ++i) x += c[i * t + b];
      double* p = &pos[label[b] * half];
      double* n = &neg[label[b] * half];
      p[0] += std::max(x, 0.0);
      n[0] += std::max(-x, 0.0);
      std::uint64_t sig = 0;
      for (std::size_t h = 1; h < half; ++h) {
        const std::size_t i = flip[h];
        sig ^= std::uint64_t{1} << i;
        const double d = 2.0 * c[i * t + b];
        x += ((sig >> i) & 1U) ? -d : d;
        p[h] += std::max(x, 0.0);
        n[h] += std::max(-x, 0.0);
      }
    }
    double total = 0.0;
    for (std::size_t j = 0; j < g * half; j += half) {
      double bj = 0.0;
      for (std::size_t h = 0; h < half; ++h) bj = std::max(bj, std::max(pos[j + h], neg[j + h]));
      total += bj;
    }
    best = std::max(best, total);
  }
  return best;
}

}  // namespace detail

/// Lower bound on the cut-P-norm: alternately fix the sign pattern A and
/// optimize S and T for the cut norm of W^A, then reset A to the signs of
/// the block integrals over S x T.
inline CutPResult cut_p_norm_heuristic(const Matrix& mass, const Partition& groups, const CutNormOptions& opts = {}) {
  const std::size_t t = mass.rows();
  const std::size_t g = groups.classes();
  detail::require(groups.size() == t, "grouping must label every class");
  detail::require(opts.restarts >= 1, "need at least one restart");
  CutPResult res;
  res.pattern = SignPattern::all_plus(g);
  if (t == 0) return res;
  struct Local {
    double value = -1.0;
    std::vector<std::size_t> S, T;
  };
  std::vector<Local> per(opts.restarts);
  parallel_for(opts.restarts, opts.threads, [&](std::size_t r) {
    Rng rng(opts.seed, Stream::cut_p_norm, r);
    SignPattern a = SignPattern::all_plus(g);
    if (r > 0)
      for (auto& e : a.entries) e = rng.coin() ? 1 : -1;
    Local best;
    for (int round = 0; round < 50; ++round) {
      Matrix signed_mass = mass;
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j) signed_mass(i, j) *= a(groups.label(i), groups.label(j));
      CutNormOptions inner = opts;
      inner.restarts = 1;
      inner.threads = 1;
      inner.seed = derive_seed(opts.seed, Stream::cut_p_norm, r * 64 + static_cast<std::size_t>(round));
      const auto cut = cut_norm_heuristic(signed_mass, inner);
      const double v = cut_p_value(mass, groups, cut.witness.S, cut.witness.T);
      if (v <= best.value + kTieTolerance) break;
      best = {v, cut.witness.S, cut.witness.T};
      a = detail::signs_of(mass, groups, best.S, best.T);
    }
    per[r] = std::move(best);
  });
  std::size_t win = 0;
  for (std::size_t r = 1; r < per.size(); ++r)
    if (per[r].value > per[win].value + kTieTolerance) win = r;
  res.witness.S = per[win].S;
  res.witness.T = per[win].T;
  res.witness.value = cut_p_value(mass, groups, res.witness.S, res.witness.T);
  res.value = res.witness.value;
  res.pattern = detail::signs_of(mass, groups, res.witness.S, res.witness.T);
  return res;
}

inline CutPResult cut_p_norm(const StepKernel& w, const Partition& groups, Mode mode, const CutNormOptions& opts = {}) {
  const Matrix mass = w.mass_matrix();
  CutPResult r = mode == Mode::exact ? cut_p_norm_exact(mass, groups, opts) : cut_p_norm_heuristic(mass, groups, opts);
  r.atoms = w.partition();
  return r;
}

/// Writes `w` over the common refinement of its partition and `p`, and
/// returns the grouping of the refined classes into the classes of `p`.
inline std::pair<StepKernel, Partition> align_to(const StepKernel& w, const IntervalPartition& p) {
  auto r = common_refinement(w.partition(), p);
  return {w.rebase(r.partition), Partition(std::move(r.second), p.size())};
}

/// Cut-P-norm for an interval partition P. If the kernel's partition does
/// not refine P it is first refined; the witness then indexes the classes of
/// the common refinement, reported in `atoms`.
inline CutPResult cut_p_norm(const StepKernel& w, const IntervalPartition& p, Mode mode,
                             const CutNormOptions& opts = {}) {
  auto [aligned, groups] = align_to(w, p);
  return cut_p_norm(aligned, groups, mode, opts);
}

/// Colored cut-P-norm: the sum of the component norms.
inline double cut_p_norm_sum(std::span<const StepKernel> parts, const Partition& groups, Mode mode,
                             const CutNormOptions& opts = {}) {
  double s = 0.0;
  for (const auto& p : parts) s += cut_p_norm(p, groups, mode, opts).value;
  return s;
}

// ---------------------------------------------------------------------------
// overlay distances

struct OverlayOptions {
  Mode mode = Mode::exact;
  std::size_t permutation_limit = 8;  ///< largest t for full permutation enumeration
  CutNormOptions cut;
};

/// Result of a minimization over class permutations. The minimizing overlay
/// compares class i of the first object with class permutation[i] of the
/// second.
struct OverlayResult {
  double value = 0.0;
  std::vector<std::size_t> permutation;
  bool exhaustive = true;  ///< false when local search was used
};

namespace detail {

inline void require_equal_classes(const StepKernel& a, const StepKernel& b) {
  if (a.classes() != b.classes())
    throw InvalidArgument("mismatched sizes: " + std::to_string(a.classes()) + " vs " + std::to_string(b.classes()) +
                          " classes");
  detail::require(a.partition().equal_measures() && b.partition().equal_measures(),
                  "overlay distances need equal-measure classes");
  detail::require(std::abs(a.measure(0) - b.measure(0)) <= kMeasureTolerance, "class measures differ");
}

/// b^phi written over a's partition, with class i taken from class phi[i] of b.
inline StepKernel overlay(const StepKernel& a, const StepKernel& b, std::span<const std::size_t> phi) {
  return StepKernel(a.partition(), b.permuted(phi).values(), b.bound());
}

/// Minimizes objective(phi) over permutations of [t]: exhaustive up to
/// `limit`, else degree-profile alignment followed by pairwise swaps.
template <class Objective>
OverlayResult minimize_over_permutations(const StepKernel& a, const StepKernel& b, std::size_t limit,
                                         Objective&& objective) {
  const std::size_t t = a.classes();
  OverlayResult res;
  std::vector<std::size_t> phi(t);
  std::iota(phi.begin(), phi.end(), std::size_t{0});
  if (t <= limit) {
    res.value = objective(phi);
    res.permutation = phi;
    while (std::next_permutation(phi.begin(), phi.end())) {
      const double v = objective(phi);
      if (v < res.value - kTieTolerance) {
        res.value = v;
        res.permutation = phi;
      }
    }
    return res;
  }
  res.exhaustive = false;
  auto degrees = [](const StepKernel& w) {
    std::vector<double> d(w.classes(), 0.0);
    for (std::size_t i = 0; i < w.classes(); ++i)
      for (std::size_t j = 0; j < w.classes(); ++j) d[i] += w.value(i, j) * w.measure(j);
    return d;
  };
  const auto da = degrees(a), db = degrees(b);
  std::vector<std::size_t> oa(t), ob(t);
  std::iota(oa.begin(), oa.end(), std::size_t{0});
  std::iota(ob.begin(), ob.end(), std::size_t{0});
  std::stable_sort(oa.begin(), oa.end(), [&](auto x, auto y) { return da[x] < da[y]; });
  std::stable_sort(ob.begin(), ob.end(), [&](auto x, auto y) { return db[x] < db[y]; });
  for (std::size_t r = 0; r < t; ++r) phi[oa[r]] = ob[r];
  double value = objective(phi);
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = i + 1; j < t; ++j) {
        std::swap(phi[i], phi[j]);
        const double v = objective(phi);
        if (v < value - kTieTolerance) {
          value = v;
          improved = true;
        } else {
          std::swap(phi[i], phi[j]);
        }
      }
  }
  res.value = value;
  res.permutation = phi;
  return res;
}

}  // namespace detail

/// Minimum over class permutations phi of the cut norm of F - G^phi. This is
/// an upper bound on the cut distance, which allows all measure preserving
/// maps.
inline OverlayResult delta_hat(const StepKernel& f, const StepKernel& g, const OverlayOptions& opts = {}) {
  detail::require_equal_classes(f, g);
  const Mode inner = f.classes() <= opts.cut.exact_limit ? Mode::exact : Mode::heuristic;
  return detail::minimize_over_permutations(f, g, opts.mode == Mode::exact ? opts.permutation_limit : 0,
                                            [&](std::span<const std::size_t> phi) {
                                              return cut_norm(f - detail::overlay(f, g, phi), inner, opts.cut).value;
                                            });
}

/// Graph version. With `blow_up_factor` the first graph is replaced by its
/// blow-up and the sizes must then agree; without it graphs of different
/// orders are blown up to the least common multiple of the orders.
inline OverlayResult delta_hat(const SimpleGraph& f, const SimpleGraph& g,
                               std::optional<std::size_t> blow_up_factor = std::nullopt,
                               const OverlayOptions& opts = {}) {
  detail::require(f.order() >= 1 && g.order() >= 1, "graphs must be non-empty");
  SimpleGraph a = f, b = g;
  if (blow_up_factor) {
    a = blow_up(f, *blow_up_factor);
  } else if (f.order() != g.order()) {
    const std::size_t l = std::lcm(f.order(), g.order());
    if (l > 64)
      throw InvalidArgument("mismatched sizes " + std::to_string(f.order()) + " and " + std::to_string(g.order()) +
                            " need a blow-up to " + std::to_string(l) + " vertices; pass a factor");
    a = blow_up(f, l / f.order());
    b = blow_up(g, l / g.order());
  }
  if (a.order() != b.order())
    throw InvalidArgument("mismatched sizes: " + std::to_string(a.order()) + " vs " + std::to_string(b.order()) +
                          " vertices with no valid blow-up factor");
  return delta_hat(graphon_of_graph(a).kernel(), graphon_of_graph(b).kernel(), opts);
}

/// Minimum over class permutations phi of the cut-P-norm of U^phi - W.
inline OverlayResult d_deviation(const StepKernel& u, const StepKernel& w, const IntervalPartition& p,
                                 const OverlayOptions& opts = {}) {
  detail::require_equal_classes(w, u);
  const auto r = common_refinement(w.partition(), p);
  const Partition groups(r.second, p.size());
  const Mode inner = opts.mode == Mode::exact && r.partition.size() <= opts.cut.exact_limit && p.size() <= 5
                         ? Mode::exact
                         : Mode::heuristic;
  return detail::minimize_over_permutations(
      w, u, opts.mode == Mode::exact ? opts.permutation_limit : 0, [&](std::span<const std::size_t> phi) {
        const StepKernel diff = detail::overlay(w, u, phi) - w;
        return cut_p_norm(diff.rebase(r.partition), groups, inner, opts.cut).value;
      });
}

}  // namespace graphlim
