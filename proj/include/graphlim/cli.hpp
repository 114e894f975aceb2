#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "graphlim/colorings.hpp"
#include "graphlim/densities.hpp"
#include "graphlim/energies.hpp"
#include "graphlim/errors.hpp"
#include "graphlim/format.hpp"
#include "graphlim/io.hpp"
#include "graphlim/nd_harness.hpp"
#include "graphlim/norms.hpp"
#include "graphlim/regularity.hpp"
#include "graphlim/sampling.hpp"

namespace graphlim::cli {

/// Rows of text cells; numeric cells are written bare in JSON.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  Table& row() {
    rows_.emplace_back();
    return *this;
  }
  Table& num(double x) { return cell(format_double(x), true); }
  Table& num(std::size_t x) { return cell(std::to_string(x), true); }
  Table& text(std::string s) { return cell(std::move(s), false); }

  void write_csv(std::ostream& out) const {
    for (std::size_t i = 0; i < header_.size(); ++i) out << (i ? "," : "") << header_[i];
    out << '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i].first;
      out << '\n';
    }
  }

  nlohmann::ordered_json to_json() const {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows_) {
      nlohmann::ordered_json o = nlohmann::ordered_json::object();
      for (std::size_t i = 0; i < r.size() && i < header_.size(); ++i) {
        // Keep the 12-digit text of numbers: parse it back as a JSON number.
        o[header_[i]] = r[i].second ? nlohmann::ordered_json::parse(r[i].first) : nlohmann::ordered_json(r[i].first);
      }
      arr.push_back(std::move(o));
    }
    return arr;
  }

 private:
  Table& cell(std::string s, bool numeric) {
    if (rows_.empty()) rows_.emplace_back();
    rows_.back().emplace_back(std::move(s), numeric);
    return *this;
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::pair<std::string, bool>>> rows_;
};

namespace detail {

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline std::string join(std::span<const std::size_t> xs, const char* sep = " ") {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? sep : "") + std::to_string(xs[i]);
  return s;
}

/// JSON dump with numbers rendered through format_double.
inline void dump(std::ostream& out, const nlohmann::ordered_json& j) { out << j.dump(2) << '\n'; }

inline nlohmann::ordered_json number(double x) { return nlohmann::ordered_json::parse(format_double(x)); }

inline SimpleGraph complete_graph(std::size_t n) {
  SimpleGraph g(n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) g.add_edge(u, v);
  return g;
}

inline SimpleGraph path_graph(std::size_t n) {
  SimpleGraph g(n);
  for (std::size_t u = 0; u + 1 < n; ++u) g.add_edge(u, u + 1);
  return g;
}

/// Parameters usable by `concentrate`.
inline GraphParameter named_parameter(const std::string& name, std::size_t threads) {
  if (name == "edge") return density_parameter(complete_graph(2), name);
  if (name == "triangle") return density_parameter(complete_graph(3), name);
  if (name == "cherry") return density_parameter(path_graph(3), name);
  if (name == "constant") return constant_parameter(0.5);
  for (const auto& w : builtin_witnesses())
    if (w.name == name)
      return {name, [w, threads](const SimpleGraph& g) { return nd_value(g, w, {}, {32, 0, threads}).value; }, {}};
  throw InvalidArgument("unknown parameter '" + name +
                        "' (known: edge, triangle, cherry, constant, maxcut, max3col, maxdicut, color0)");
}

}  // namespace detail

struct GlobalOptions {
  std::size_t threads = 1;
  std::string format = "csv";
};

/// Runs one command line (without the program name). Returns the exit status.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dense graph limit toolkit: cut norms, regularity, densities, energies, colorings, nd testing",
               "graphlim"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));

  std::function<void(std::ostream&)> action;
  std::string out_path;  // per-subcommand --out

  auto emit = [&](const Table& t, std::ostream& o) {
    if (g.format == "json")
      detail::dump(o, t.to_json());
    else
      t.write_csv(o);
  };

  // cutnorm ------------------------------------------------------------------
  std::string cn_in, cn_mode = "exact";
  std::size_t cn_restarts = 32;
  std::uint64_t cn_seed = 0;
  auto* cutnorm = app.add_subcommand("cutnorm", "Cut norm of a step kernel");
  cutnorm->add_option("--input,--in", cn_in, "Kernel file (.gk)")->required();
  cutnorm->add_option("--mode", cn_mode)->check(CLI::IsMember({"exact", "heur", "heuristic"}));
  cutnorm->add_option("--restarts", cn_restarts)->check(CLI::PositiveNumber);
  cutnorm->add_option("--seed", cn_seed);
  cutnorm->callback([&] {
    action = [&](std::ostream& o) {
      const auto f = load_kernel(cn_in);
      if (!f.kernel) throw InvalidArgument("cutnorm needs a kernel or graphon file");
      const Mode mode = cn_mode == "exact" ? Mode::exact : Mode::heuristic;
      const auto r = cut_norm(*f.kernel, mode, {20, cn_restarts, cn_seed, g.threads});
      Table t({"value", "mode", "S", "T"});
      t.row().num(r.value).text(to_string(mode)).text(detail::join(r.witness.S)).text(detail::join(r.witness.T));
      emit(t, o);
    };
  });

  // regularity ---------------------------------------------------------------
  std::string rg_in, rg_mode = "weak", rg_oracle = "exact";
  RegularityConfig rg_cfg;
  rg_cfg.epsilon = 0.3;
  std::optional<double> rg_granularity;
  std::uint64_t rg_seed = 0;
  auto* regularity = app.add_subcommand("regularity", "Weak or cut-P regularity partition");
  regularity->add_option("--input,--in", rg_in, "Kernel or colored digraphon file (.gk)")->required();
  regularity->add_option("--eps", rg_cfg.epsilon)->check(CLI::Range(1e-6, 1.0));
  regularity->add_option("--m0", rg_cfg.m0)->check(CLI::PositiveNumber);
  regularity->add_option("--mode", rg_mode)->check(CLI::IsMember({"weak", "cutp"}));
  regularity->add_option("--oracle", rg_oracle)->check(CLI::IsMember({"exact", "heur", "heuristic"}));
  regularity->add_flag("--equipartition", rg_cfg.equipartition);
  regularity->add_option("--granularity", rg_granularity);
  regularity->add_option("--max-iterations", rg_cfg.max_iterations);
  regularity->add_option("--seed", rg_seed);
  regularity->add_option("--out", out_path, "Write the partition as JSON here");
  regularity->callback([&] {
    action = [&](std::ostream& o) {
      const auto f = load_kernel(rg_in);
      RegularityConfig cfg = rg_cfg;
      cfg.granularity = rg_granularity;
      cfg.oracle_mode = rg_oracle == "exact" ? Mode::exact : Mode::heuristic;
      cfg.cut.seed = rg_seed;
      cfg.cut.threads = g.threads;
      RegularityResult r;
      if (f.colored)
        r = rg_mode == "weak" ? weak_regularity_colored(*f.colored, cfg) : cut_p_regularity(*f.colored, cfg);
      else
        r = rg_mode == "weak" ? weak_regularity(*f.kernel, cfg) : cut_p_regularity(*f.kernel, cfg);
      nlohmann::ordered_json part;
      part["atoms"] = std::vector<double>(r.atoms.measures().begin(), r.atoms.measures().end());
      part["labels"] = std::vector<std::size_t>(r.partition.labels().begin(), r.partition.labels().end());
      part["classes"] = r.classes();
      part["iterations"] = r.iterations;
      part["residual"] = detail::number(r.certified_residual);
      part["threshold"] = detail::number(r.threshold);
      part["certified"] = r.certified;
      part["exhaustive"] = r.exhaustive;
      part["increments_ok"] = r.increments_ok;
      if (!r.note.empty()) part["note"] = r.note;
      Table t({"iteration", "energy", "increment"});
      for (std::size_t i = 0; i < r.energy_trace.size(); ++i)
        t.row().num(i).num(r.energy_trace[i]).num(i ? r.energy_trace[i] - r.energy_trace[i - 1] : 0.0);
      if (!out_path.empty()) {
        std::ofstream pf(out_path);
        if (!pf) throw InvalidArgument("cannot write '" + out_path + "'");
        detail::dump(pf, part);
      }
      if (g.format == "json") {
        nlohmann::ordered_json j;
        j["partition"] = part;
        j["trace"] = t.to_json();
        detail::dump(o, j);
      } else {
        t.write_csv(o);
      }
    };
  });

  // density ------------------------------------------------------------------
  std::string dn_f, dn_in;
  auto* density = app.add_subcommand("density", "Induced density t(F, .) in a graph, graphon or colored digraphon");
  density->add_option("--F", dn_f, "Pattern (.graph, or .cgraph for colored targets)")->required();
  density->add_option("--in", dn_in, "Target (.graph or .gk)")->required();
  density->callback([&] {
    action = [&](std::ostream& o) {
      double v = 0.0;
      if (detail::ends_with(dn_in, ".gk")) {
        const auto w = load_kernel(dn_in);
        if (w.colored)
          v = density_colored(load_colored_digraph(dn_f), *w.colored);
        else
          v = density_step_graphon(load_graph(dn_f), w.graphon());
      } else {
        v = induced_density_graph(load_graph(dn_f), load_graph(dn_in));
      }
      if (g.format == "json") {
        nlohmann::ordered_json j;
        j["density"] = detail::number(v);
        detail::dump(o, j);
      } else {
        o << format_double(v) << '\n';
      }
    };
  });

  // sample -------------------------------------------------------------------
  std::string sm_in;
  std::size_t sm_q = 10, sm_trials = 1;
  std::uint64_t sm_seed = 0;
  auto* sample = app.add_subcommand("sample", "Draw G(q, source) samples");
  sample->add_option("--in", sm_in, "Source (.graph or .gk)")->required();
  sample->add_option("--q", sm_q)->check(CLI::PositiveNumber);
  sample->add_option("--trials", sm_trials)->check(CLI::PositiveNumber);
  sample->add_option("--seed", sm_seed);
  sample->callback([&] {
    action = [&](std::ostream& o) {
      std::optional<KernelFile> kf;
      std::optional<SimpleGraph> src;
      if (detail::ends_with(sm_in, ".gk"))
        kf = load_kernel(sm_in);
      else
        src = load_graph(sm_in);
      const bool colored = kf && kf->colored;
      Table t(colored ? std::vector<std::string>{"trial", "q", "color_counts"}
                      : std::vector<std::string>{"trial", "q", "edges", "edge_density", "edge_list"});
      for (std::size_t tr = 0; tr < sm_trials; ++tr) {
        const auto s = derive_seed(sm_seed, Stream::concentration, tr);
        if (colored) {
          const auto d = sample_graphon(*kf->colored, sm_q, s);
          std::vector<std::size_t> counts(kf->colored->k(), 0);
          for (std::size_t i = 0; i < sm_q; ++i)
            for (std::size_t j = 0; j < sm_q; ++j)
              if (i != j) ++counts[d.result.color(i, j)];
          t.row().num(tr).num(sm_q).text(detail::join(counts));
          continue;
        }
        const SimpleGraph h = src ? sample_graph(*src, sm_q, s).result : sample_graphon(kf->graphon(), sm_q, s).result;
        std::string edges;
        for (std::size_t u = 0; u < h.order(); ++u)
          for (std::size_t v = u + 1; v < h.order(); ++v)
            if (h.adjacent(u, v)) edges += (edges.empty() ? "" : " ") + std::to_string(u) + "-" + std::to_string(v);
        const double pairs = static_cast<double>(sm_q) * static_cast<double>(sm_q - 1) / 2.0;
        t.row().num(tr).num(sm_q).num(h.edge_count()).num(pairs > 0 ? h.edge_count() / pairs : 0.0).text(edges);
      }
      emit(t, o);
    };
  });

  // concentrate --------------------------------------------------------------
  std::string cc_in, cc_param = "edge";
  std::vector<std::size_t> cc_q{5, 10, 20, 40};
  double cc_eps = 0.1;
  std::size_t cc_trials = 1000;
  std::uint64_t cc_seed = 0;
  auto* concentrate = app.add_subcommand("concentrate", "Deviation of f(sample) from f(source) over a q grid");
  concentrate->add_option("--in", cc_in, "Source (.graph or .gk)")->required();
  concentrate->add_option("--param", cc_param);
  concentrate->add_option("--q", cc_q)->delimiter(',');
  concentrate->add_option("--eps", cc_eps)->check(CLI::PositiveNumber);
  concentrate->add_option("--trials", cc_trials)->check(CLI::PositiveNumber);
  concentrate->add_option("--seed", cc_seed);
  concentrate->add_option("--out", out_path);
  concentrate->callback([&] {
    action = [&](std::ostream& o) {
      const auto f = detail::named_parameter(cc_param, g.threads);
      std::vector<ConcentrationRow> rows;
      if (detail::ends_with(cc_in, ".gk")) {
        const auto w = load_kernel(cc_in).graphon();
        rows = concentration_experiment(w, f, cc_q, cc_trials, cc_eps, cc_seed, g.threads);
      } else {
        const auto src = load_graph(cc_in);
        for (auto q : cc_q)
          if (q > src.order())
            throw InvalidArgument("sample size q=" + std::to_string(q) + " exceeds order n=" +
                                  std::to_string(src.order()));
        rows = concentration_experiment(src, f, cc_q, cc_trials, cc_eps, cc_seed, g.threads);
      }
      Table t({"q", "epsilon", "failure_rate", "mean_abs_dev", "median_abs_dev", "q90_abs_dev", "trials"});
      for (const auto& r : rows)
        t.row().num(r.q).num(r.epsilon).num(r.failure_rate).num(r.mean_abs_dev).num(r.median_abs_dev).num(
            r.q90_abs_dev).num(r.trials);
      emit(t, o);
    };
  });

  // energy -------------------------------------------------------------------
  std::string en_in, en_j = "maxcut", en_mode = "exact";
  std::optional<std::size_t> en_s;
  std::size_t en_restarts = 32;
  std::uint64_t en_seed = 0;
  auto* energy = app.add_subcommand("energy", "Ground state energy max_T E_T(A, J)");
  energy->add_option("--in", en_in, "Array (.graph, .mat) or kernel (.gk, fractional energy)")->required();
  energy->add_option("--J", en_j, "'maxcut' or a .mat coupling matrix");
  energy->add_option("--s", en_s, "Number of parts");
  energy->add_option("--mode", en_mode)->check(CLI::IsMember({"exact", "local", "auto"}));
  energy->add_option("--restarts", en_restarts)->check(CLI::PositiveNumber);
  energy->add_option("--seed", en_seed);
  std::size_t es_q = 16, es_trials = 100, es_baseline_restarts = 256;
  double es_rho = 0.15;
  bool es_summary = false, es_replace = false;
  auto* energy_sample = energy->add_subcommand("sample", "Ground state energy of random principal subarrays");
  energy_sample->add_option("--q", es_q)->check(CLI::PositiveNumber);
  energy_sample->add_option("--trials", es_trials)->check(CLI::PositiveNumber);
  energy_sample->add_option("--rho", es_rho)->check(CLI::PositiveNumber);
  energy_sample->add_option("--baseline-restarts", es_baseline_restarts)->check(CLI::PositiveNumber);
  energy_sample->add_flag("--summary", es_summary, "Print only the exceedance summary");
  energy_sample->add_flag("--with-replacement", es_replace);
  energy_sample->fallthrough();
  auto coupling = [&](std::size_t default_s) {
    if (en_j == "maxcut") return maxcut_coupling(en_s.value_or(default_s));
    Matrix j = load_matrix(en_j);
    if (en_s && *en_s != j.rows()) throw InvalidArgument("--s does not match the coupling matrix size");
    return j;
  };
  auto load_array = [&] {
    if (detail::ends_with(en_in, ".mat")) return load_matrix(en_in);
    return adjacency_matrix(load_graph(en_in));
  };
  energy->callback([&] {
    if (energy_sample->parsed()) {
      action = [&](std::ostream& o) {
        const Matrix a = load_array();
        const Matrix j = coupling(2);
        const EnergyOptions base_opts{es_baseline_restarts, derive_seed(en_seed, Stream::energy_local, 1u << 20),
                                      g.threads};
        const auto base = en_mode == "local" ? gse_local(a, j, base_opts) : gse_auto(a, j, base_opts);
        GseSamplingOptions so;
        so.q = es_q;
        so.trials = es_trials;
        so.rho = es_rho;
        so.seed = en_seed;
        so.threads = g.threads;
        so.restarts = en_restarts;
        so.with_replacement = es_replace;
        const auto ex = gse_sampling_experiment(a, j, base.value, so);
        Table summary({"q", "trials", "rho", "threshold", "baseline", "baseline_mode", "exceedance_rate"});
        summary.row().num(ex.q).num(ex.trials.size()).num(ex.rho).num(ex.threshold).num(ex.baseline).text(
            base.exact ? "exact" : "local").num(ex.exceedance_rate);
        if (es_summary) return emit(summary, o);
        if (g.format == "json") {
          Table t({"q", "trial", "sample_value", "baseline", "deviation", "exceeds", "mode"});
          for (const auto& tr : ex.trials)
            t.row().num(ex.q).num(tr.trial).num(tr.sample_value).num(ex.baseline).num(tr.deviation).num(
                std::size_t{tr.deviation > ex.threshold}).text(tr.exact ? "exact" : "local");
          nlohmann::ordered_json jj;
          jj["summary"] = summary.to_json()[0];
          jj["trials"] = t.to_json();
          detail::dump(o, jj);
        } else {
          write_csv(o, ex);
        }
      };
      return;
    }
    action = [&](std::ostream& o) {
      if (detail::ends_with(en_in, ".gk")) {
        const auto f = load_kernel(en_in);
        if (!f.kernel) throw InvalidArgument("fractional energy needs a kernel file");
        const Matrix j = coupling(2);
        const auto r = fractional_energy(*f.kernel, j, {en_restarts, en_seed, g.threads});
        Table t({"value", "mode", "mass"});
        std::string mass;
        for (std::size_t a = 0; a < r.mass.rows(); ++a)
          for (std::size_t c = 0; c < r.mass.cols(); ++c)
            mass += (mass.empty() ? "" : " ") + format_double(r.mass(a, c));
        t.row().num(r.value).text("fractional-lower-bound").text(mass);
        return emit(t, o);
      }
      const Matrix a = load_array();
      const Matrix j = coupling(2);
      const EnergyOptions opts{en_restarts, en_seed, g.threads};
      const auto r = en_mode == "exact" ? gse_exact(a, j) : en_mode == "local" ? gse_local(a, j, opts)
                                                                               : gse_auto(a, j, opts);
      Table t({"value", "mode", "partition"});
      t.row().num(r.value).text(r.exact ? "exact" : "local").text(detail::join(r.partition.labels()));
      emit(t, o);
    };
  });

  // colorings ----------------------------------------------------------------
  std::string co_in;
  std::size_t co_k = 2, co_m = 1, co_limit = 1000;
  auto* colorings = app.add_subcommand("colorings", "(k,m)-colorings of a graph");
  colorings->require_subcommand(1);
  auto* co_enum = colorings->add_subcommand("enumerate", "List colorings in enumeration order");
  auto* co_count = colorings->add_subcommand("count", "Number of colorings");
  for (auto* s : {co_enum, co_count}) {
    s->add_option("--in", co_in, "Graph (.graph)")->required();
    s->add_option("--k", co_k)->check(CLI::PositiveNumber);
    s->add_option("--m", co_m);
    s->fallthrough();
  }
  co_enum->add_option("--limit", co_limit);
  co_enum->callback([&] {
    action = [&](std::ostream& o) {
      const auto gr = load_graph(co_in);
      Table t({"index", "colors"});
      std::size_t idx = 0;
      if (co_limit > 0)
        for_each_km_coloring(gr, co_k, co_m, [&](const ColoredDigraph& c) {
          std::string s;
          for (std::size_t i = 0; i < gr.order(); ++i)
            for (std::size_t j = i + 1; j < gr.order(); ++j)
              s += (s.empty() ? "" : " ") + std::to_string(c.color(i, j)) + ":" + std::to_string(c.color(j, i));
          t.row().num(idx).text(s);
          return ++idx < co_limit;
        });
      emit(t, o);
    };
  });
  co_count->callback([&] {
    action = [&](std::ostream& o) {
      const auto gr = load_graph(co_in);
      Table t({"n", "edges", "k", "m", "count"});
      t.row().num(gr.order()).num(gr.edge_count()).num(co_k).num(co_m).num(count_km_colorings(gr, co_k, co_m));
      emit(t, o);
    };
  });

  // ndtest -------------------------------------------------------------------
  std::string nd_in, nd_witness = "maxcut", nd_mode = "auto";
  std::vector<std::size_t> nd_q;
  std::size_t nd_trials = 100, nd_restarts = 32;
  double nd_eps = 0.1;
  std::uint64_t nd_seed = 0;
  bool nd_summary = false;
  auto* ndtest = app.add_subcommand("ndtest", "Sample-based testing of a nondeterministic parameter");
  ndtest->add_option("--in", nd_in, "Graph (.graph)")->required();
  ndtest->add_option("--witness", nd_witness);
  ndtest->add_option("--q", nd_q)->delimiter(',');
  ndtest->add_option("--trials", nd_trials)->check(CLI::PositiveNumber);
  ndtest->add_option("--eps", nd_eps)->check(CLI::PositiveNumber);
  ndtest->add_option("--mode", nd_mode)->check(CLI::IsMember({"auto", "exact", "local"}));
  ndtest->add_option("--restarts", nd_restarts)->check(CLI::PositiveNumber);
  ndtest->add_option("--seed", nd_seed);
  ndtest->add_flag("--summary", nd_summary, "Print per-q summary instead of trial records");
  ndtest->add_option("--out", out_path);
  ndtest->callback([&] {
    action = [&](std::ostream& o) {
      const auto gr = load_graph(nd_in);
      const auto w = find_witness(nd_witness);
      std::vector<std::size_t> qs = nd_q;
      if (qs.empty()) qs.push_back(std::min(w.sample_guess, gr.order()));
      for (auto q : qs)
        if (q > gr.order())
          throw InvalidArgument("sample size q=" + std::to_string(q) + " exceeds order n=" +
                                std::to_string(gr.order()));
      NdTestingOptions opts;
      opts.trials = nd_trials;
      opts.epsilon = nd_eps;
      opts.seed = nd_seed;
      opts.threads = g.threads;
      opts.restarts = nd_restarts;
      if (nd_mode != "auto") opts.mode = nd_mode == "exact" ? SearchMode::exact : SearchMode::local;
      const auto ex = nd_testing_experiment(gr, w, qs, opts);
      if (nd_summary) {
        Table t({"witness", "q", "trials", "f_source", "source_mode", "median_abs_dev", "mean_abs_dev",
                 "one_sided_failure", "two_sided_failure", "epsilon"});
        for (const auto& r : ex.summary)
          t.row().text(w.name).num(r.q).num(r.trials).num(ex.f_source).text(ex.source_exact ? "exact" : "local").num(
              r.median_abs_dev).num(r.mean_abs_dev).num(r.one_sided_failure).num(r.two_sided_failure).num(ex.epsilon);
        return emit(t, o);
      }
      if (g.format == "json") {
        Table t({"witness", "q", "trial", "f_source", "f_sample", "deviation", "mode"});
        for (const auto& r : ex.records)
          t.row().text(r.witness).num(r.q).num(r.trial).num(r.f_source).num(r.f_sample).num(r.deviation).text(
              r.exact ? "exact" : "local");
        return emit(t, o);
      }
      write_csv(o, ex);
    };
  });

  // selftest -----------------------------------------------------------------
  auto* selftest = app.add_subcommand("selftest", "Run the built-in example checks");
  bool selftest_failed = false;
  selftest->callback([&] {
    action = [&](std::ostream& o) {
      Table t({"check", "expected", "got", "status"});
      auto check = [&](const std::string& name, double expected, double got, double tol = 1e-9) {
        const bool ok = std::abs(expected - got) <= tol;
        selftest_failed |= !ok;
        t.row().text(name).num(expected).num(got).text(ok ? "PASS" : "FAIL");
      };
      const auto k2 = detail::complete_graph(2);
      const auto c5 = [] {
        SimpleGraph c(5);
        for (std::size_t i = 0; i < 5; ++i) c.add_edge(i, (i + 1) % 5);
        return c;
      }();
      const IntervalPartition halves({0.5, 0.5});
      const StepKernel signed_two(halves, Matrix::from_rows({{1.0, -1.0}, {-1.0, 1.0}}));
      check("cutnorm constant 0.7", 0.7, cut_norm_exact(StepKernel::constant(0.7)).value);
      check("cutnorm zero", 0.0, cut_norm_exact(StepKernel::constant(0.0)).value);
      check("cutnorm +-1 checkerboard", 0.25, cut_norm_exact(signed_two).value);
      check("cut-P norm trivial P = cut norm", cut_norm_exact(signed_two).value,
            cut_p_norm(signed_two, Partition::from_labels({0, 0}), Mode::exact).value);
      RegularityConfig rc;
      rc.epsilon = 0.2;
      check("weak regularity constant: steps", 0.0,
            static_cast<double>(weak_regularity(StepKernel::constant(0.4), rc).iterations));
      const Partition one_class = Partition::from_labels({0, 0});
      const StepKernel avg = average(signed_two, one_class);
      check("average is idempotent", 1.0, average(avg, one_class).values() == avg.values());
      check("t(K2, 1/2)", 0.5, density_step_graphon(k2, StepGraphon::constant(0.5)));
      check("t(K2, K2)", 0.5, induced_density_graph(k2, k2));
      check("colored k=1 density", 1.0, density_colored(ColoredDigraph(3, 1), ColoredDigraphon::uniform(1)));
      check("sample W=1 is complete", 10.0,
            static_cast<double>(sample_graphon(StepGraphon::constant(1.0), 5, 0).result.edge_count()));
      check("sample W=0 is empty", 0.0,
            static_cast<double>(sample_graphon(StepGraphon::constant(0.0), 5, 0).result.edge_count()));
      check("count (2,1)-colorings of K2", 3.0, count_km_colorings(k2, 2, 1));
      check("enumerate (2,1)-colorings of K2", 3.0, static_cast<double>(enumerate_km_colorings(k2, 2, 1).size()));
      check("shadow all colors < m is complete", 1.0, shadow(ColoredDigraph(4, 2, 0), 1) == detail::complete_graph(4));
      check("energy 2-vertex cut", 0.5, energy_of_partition(adjacency_matrix(k2), Partition({0, 1}, 2),
                                                             maxcut_coupling()));
      check("gse max-cut C5", 0.32, gse_exact(adjacency_matrix(c5), maxcut_coupling()).value);
      check("gse empty graph J = I", 0.0, gse_exact(Matrix(4, 4), Matrix::identity(2)).value);
      check("fractional s=1 is the integral", 0.3,
            fractional_energy(StepKernel::constant(0.3), Matrix(1, 1, 1.0)).value);
      check("nd max-cut K4", 0.5, weak_nd_value(detail::complete_graph(4), find_witness("maxcut"),
                                                SearchMode::exact).value);
      check("nd max-2-colorable triangle", 4.0 / 9.0,
            weak_nd_value(detail::complete_graph(3), find_witness("maxcut"), SearchMode::exact).value);
      check("nd color-0 density C5", 0.4, nd_value_exact(c5, find_witness("color0")).value);
      const std::vector<std::size_t> full{5};
      NdTestingOptions no;
      no.trials = 1;
      check("ndtest q = n deviation", 0.0, nd_testing_experiment(c5, find_witness("maxcut"), full, no).records[0].deviation);
      emit(t, o);
    };
  });

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    // --help and --version print and succeed; every other parse problem is exit code 2.
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (!action) throw InvalidArgument("no command given");
    if (!out_path.empty() && (ndtest->parsed() || concentrate->parsed())) {
      std::ofstream f(out_path);
      if (!f) throw InvalidArgument("cannot write '" + out_path + "'");
      action(f);
    } else {
      action(out);
    }
  } catch (const GuardError& e) {
    err << "graphlim: guard: " << e.what() << '\n';
    return 3;
  } catch (const ParseError& e) {
    err << "graphlim: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "graphlim: error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "graphlim: error: " << e.what() << '\n';
    return 2;
  }
  return selftest_failed ? 1 : 0;
}

}  // namespace graphlim::cli
