#pragma once

#include <json.hpp>

#include <cctype>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "graphlim/errors.hpp"
#include "graphlim/format.hpp"
#include "graphlim/graph.hpp"
#include "graphlim/kernel.hpp"
#include "graphlim/matrix.hpp"
#include "graphlim/partition.hpp"

// File formats (all vertex and color indices 0-based; '#' starts a comment
// in the text formats):
//
//   .graph    "n m" then m lines "u v"
//   .cgraph   "n k" then one line "i j c" per ordered pair i != j
//   .mat      "rows cols" then the entries, row by row
//   .gk       JSON: {"measures": [...], "values": [[...], ...]}, optionally
//             "kind": "kernel" | "graphon"; colored digraphons use
//             {"kind": "colored", "k": K, "measures": [...],
//              "blocks": {"(a,b)": [[...]], ...}}

namespace graphlim {

namespace detail {

/// Whitespace tokenizer over a text stream that tracks line and column.
class TokenReader {
 public:
  explicit TokenReader(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    text_ = ss.str();
  }

  bool at_end() {
    skip();
    return pos_ >= text_.size();
  }

  std::size_t line() const { return line_; }
  std::size_t column() const { return col_; }

  std::string next(const std::string& what) {
    skip();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input, expected " + what, line_, col_);
    tok_line_ = line_;
    tok_col_ = col_;
    std::string tok;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '#')
      advance(tok);
    return tok;
  }

  std::size_t next_index(const std::string& what) {
    const std::string tok = next(what);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      if (tok.empty() || tok[0] == '-' || tok[0] == '+') throw std::invalid_argument("sign");
      v = std::stoull(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.empty())
      throw ParseError("expected non-negative integer for " + what + ", got '" + tok + "'", tok_line_, tok_col_);
    return static_cast<std::size_t>(v);
  }

  double next_double(const std::string& what) {
    const std::string tok = next(what);
    std::istringstream ss(tok);
    ss.imbue(std::locale::classic());
    double v = 0.0;
    ss >> v;
    if (!ss || ss.peek() != std::char_traits<char>::eof())
      throw ParseError("expected number for " + what + ", got '" + tok + "'", tok_line_, tok_col_);
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, tok_line_, tok_col_); }

 private:
  void advance(std::string& out) {
    out.push_back(text_[pos_]);
    step();
  }
  void step() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip() {
    while (pos_ < text_.size()) {
      if (text_[pos_] == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') step();
      } else if (std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        step();
      } else {
        break;
      }
    }
  }

  std::string text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1, col_ = 1;
  std::size_t tok_line_ = 1, tok_col_ = 1;
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return in;
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// graphs

inline SimpleGraph read_graph(std::istream& in) {
  detail::TokenReader r(in);
  const std::size_t n = r.next_index("vertex count");
  const std::size_t m = r.next_index("edge count");
  SimpleGraph g(n);
  for (std::size_t e = 0; e < m; ++e) {
    const std::size_t u = r.next_index("edge endpoint");
    if (u >= n) r.fail("vertex " + std::to_string(u) + " out of range for n = " + std::to_string(n));
    const std::size_t v = r.next_index("edge endpoint");
    if (v >= n) r.fail("vertex " + std::to_string(v) + " out of range for n = " + std::to_string(n));
    if (u == v) r.fail("loop at vertex " + std::to_string(u));
    g.add_edge(u, v);
  }
  if (!r.at_end()) {
    r.next("end of input");
    r.fail("trailing data after " + std::to_string(m) + " edges");
  }
  return g;
}

inline void write_graph(std::ostream& out, const SimpleGraph& g) {
  out << g.order() << ' ' << g.edge_count() << '\n';
  for (std::size_t u = 0; u < g.order(); ++u)
    for (std::size_t v = u + 1; v < g.order(); ++v)
      if (g.adjacent(u, v)) out << u << ' ' << v << '\n';
}

inline SimpleGraph load_graph(const std::string& path) {
  auto in = detail::open_input(path);
  return read_graph(in);
}

inline ColoredDigraph read_colored_digraph(std::istream& in) {
  detail::TokenReader r(in);
  const std::size_t n = r.next_index("vertex count");
  const std::size_t k = r.next_index("color count");
  if (k == 0) r.fail("need at least one color");
  ColoredDigraph g(n, k);
  std::vector<char> seen(n * n, 0);
  while (!r.at_end()) {
    const std::size_t i = r.next_index("source vertex");
    const std::size_t j = r.next_index("target vertex");
    const std::size_t c = r.next_index("color");
    if (i >= n || j >= n) r.fail("pair (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
    if (i == j) r.fail("diagonal pair (" + std::to_string(i) + "," + std::to_string(i) + ")");
    if (c >= k) r.fail("color " + std::to_string(c) + " out of range for k = " + std::to_string(k));
    if (seen[i * n + j]) r.fail("pair (" + std::to_string(i) + "," + std::to_string(j) + ") colored twice");
    seen[i * n + j] = 1;
    g.set_color(i, j, c);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && !seen[i * n + j])
        throw ParseError("pair (" + std::to_string(i) + "," + std::to_string(j) + ") has no color", r.line(),
                         r.column());
  return g;
}

inline void write_colored_digraph(std::ostream& out, const ColoredDigraph& g) {
  out << g.order() << ' ' << g.colors() << '\n';
  for (std::size_t i = 0; i < g.order(); ++i)
    for (std::size_t j = 0; j < g.order(); ++j)
      if (i != j) out << i << ' ' << j << ' ' << g.color(i, j) << '\n';
}

inline ColoredDigraph load_colored_digraph(const std::string& path) {
  auto in = detail::open_input(path);
  return read_colored_digraph(in);
}

// ---------------------------------------------------------------------------
// matrices

inline Matrix read_matrix(std::istream& in) {
  detail::TokenReader r(in);
  const std::size_t rows = r.next_index("row count");
  const std::size_t cols = r.next_index("column count");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = r.next_double("matrix entry");
  if (!r.at_end()) {
    r.next("end of input");
    r.fail("trailing data after " + std::to_string(rows) + "x" + std::to_string(cols) + " entries");
  }
  return m;
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? " " : "") << format_double(m(i, j));
    out << '\n';
  }
}

inline Matrix load_matrix(const std::string& path) {
  auto in = detail::open_input(path);
  return read_matrix(in);
}

// ---------------------------------------------------------------------------
// kernels

/// Contents of a .gk file: a kernel (possibly a graphon) or a colored digraphon.
struct KernelFile {
  std::string kind;  ///< "kernel", "graphon" or "colored"
  std::optional<StepKernel> kernel;
  std::optional<ColoredDigraphon> colored;

  StepGraphon graphon() const {
    if (!kernel) throw InvalidArgument("file holds a colored digraphon, not a graphon");
    return StepGraphon(*kernel);
  }
};

namespace detail {

inline Matrix json_matrix(const nlohmann::json& j, std::size_t t, const std::string& what) {
  if (!j.is_array() || j.size() != t) throw ParseError(what + " must be a " + std::to_string(t) + "x" +
                                                           std::to_string(t) + " array of arrays", 0);
  Matrix m(t, t);
  for (std::size_t i = 0; i < t; ++i) {
    if (!j[i].is_array() || j[i].size() != t)
      throw ParseError(what + " row " + std::to_string(i) + " must have " + std::to_string(t) + " entries", 0);
    for (std::size_t c = 0; c < t; ++c) {
      if (!j[i][c].is_number()) throw ParseError(what + " entries must be numbers", 0);
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

}  // namespace detail

inline KernelFile read_kernel(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    if (const auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    throw ParseError("invalid JSON (" + msg + ")", line, col);
  }
  if (!j.is_object() || !j.contains("measures") || !j["measures"].is_array())
    throw ParseError("kernel file needs a \"measures\" array", 1, 1);
  std::vector<double> measures;
  for (const auto& x : j["measures"]) {
    if (!x.is_number()) throw ParseError("measures must be numbers", 0);
    measures.push_back(x.get<double>());
  }
  const std::size_t t = measures.size();
  KernelFile f;
  f.kind = j.value("kind", j.contains("blocks") ? std::string("colored") : std::string("kernel"));
  try {
    IntervalPartition p(measures);
    if (f.kind == "colored") {
      if (!j.contains("k") || !j["k"].is_number_unsigned()) throw ParseError("colored file needs \"k\"", 0);
      const std::size_t k = j["k"].get<std::size_t>();
      if (!j.contains("blocks") || !j["blocks"].is_object()) throw ParseError("colored file needs \"blocks\"", 0);
      std::vector<Matrix> blocks(k * k, Matrix(t, t));
      std::vector<char> seen(k * k, 0);
      for (const auto& [key, val] : j["blocks"].items()) {
        std::size_t a = 0, b = 0;
        char l = 0, comma = 0, r = 0;
        std::istringstream ks(key);
        if (!(ks >> l >> a >> comma >> b >> r) || l != '(' || comma != ',' || r != ')' || a >= k || b >= k)
          throw ParseError("bad block key '" + key + "' (expected \"(a,b)\" with a, b < k)", 0);
        blocks[a * k + b] = detail::json_matrix(val, t, "block " + key);
        seen[a * k + b] = 1;
      }
      for (std::size_t z = 0; z < k * k; ++z)
        if (!seen[z])
          throw ParseError("missing block (" + std::to_string(z / k) + "," + std::to_string(z % k) + ")", 0);
      f.colored.emplace(k, p, std::move(blocks));
    } else if (f.kind == "kernel" || f.kind == "graphon") {
      if (!j.contains("values")) throw ParseError("kernel file needs \"values\"", 0);
      StepKernel w(p, detail::json_matrix(j["values"], t, "values"));
      if (f.kind == "graphon") (void)StepGraphon(w);  // validates symmetry and range
      f.kernel = std::move(w);
    } else {
      throw ParseError("unknown kind '" + f.kind + "'", 0);
    }
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), 0);
  }
  return f;
}

inline KernelFile load_kernel(const std::string& path) {
  auto in = detail::open_input(path);
  return read_kernel(in);
}

namespace detail {

inline nlohmann::ordered_json matrix_json(const Matrix& m) {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace detail

inline void write_kernel(std::ostream& out, const StepKernel& w, const std::string& kind = "kernel") {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["measures"] = std::vector<double>(w.partition().measures().begin(), w.partition().measures().end());
  j["values"] = detail::matrix_json(w.values());
  out << j.dump() << '\n';
}

inline void write_kernel(std::ostream& out, const ColoredDigraphon& w) {
  nlohmann::ordered_json j;
  j["kind"] = "colored";
  j["k"] = w.k();
  j["measures"] = std::vector<double>(w.partition().measures().begin(), w.partition().measures().end());
  auto blocks = nlohmann::ordered_json::object();
  for (std::size_t a = 0; a < w.k(); ++a)
    for (std::size_t b = 0; b < w.k(); ++b)
      blocks["(" + std::to_string(a) + "," + std::to_string(b) + ")"] = detail::matrix_json(w.block(a, b));
  j["blocks"] = blocks;
  out << j.dump() << '\n';
}

}  // namespace graphlim
