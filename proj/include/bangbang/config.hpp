#pragma once

// Run configuration: a small structured text format.
//
//   file   := entry*
//   entry  := key '=' value | key '{' entry* '}'
//   value  := number | identifier | "string" | '[' value (',' value)* ']'
//           | name '{' entry* '}' | name '(' key '=' value (',' ...)* ')'
//
// The last two forms are blocks with an implied `kind = name`, so
// `set = box(lo=[-1], hi=[1])` equals `set { kind = box; lo = [-1]; hi = [1] }`.
//
// '#' starts a comment. Keys inside one block must be unique, and every key
// must be known to the reader of its block (see docs/config.md).

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bangbang/admissible.hpp"
#include "bangbang/catalog.hpp"
#include "bangbang/elliptic.hpp"
#include "bangbang/error.hpp"
#include "bangbang/expression.hpp"
#include "bangbang/meshfield.hpp"
#include "bangbang/moment.hpp"
#include "bangbang/numeric.hpp"
#include "bangbang/ode.hpp"
#include "bangbang/solver.hpp"

namespace bangbang::config {

struct Block;

struct Value {
  enum class Kind { number, identifier, string, list, block };
  Kind kind = Kind::number;
  double number = 0.0;
  std::string text;  // identifier, string, or the number as written
  std::vector<Value> items;
  std::shared_ptr<Block> block;
  int line = 0;
};

struct Block {
  std::vector<std::pair<std::string, Value>> entries;
  int line = 0;
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string text) : s_(std::move(text)) {}

  Block parse_file() {
    Block b = parse_entries(false);
    skip();
    if (pos_ < s_.size()) error("unexpected '" + std::string(1, s_[pos_]) + "'");
    return b;
  }

 private:
  [[noreturn]] void error(const std::string& msg) const {
    fail(ErrorKind::validation, "config line " + std::to_string(line_) + ": " + msg);
  }

  void skip() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c)) || c == ';') {
        if (c == '\n') ++line_;
        ++pos_;
      } else {
        break;
      }
    }
  }

  static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  }

  std::string identifier() {
    if (pos_ >= s_.size() || !ident_start(s_[pos_])) error("expected a key");
    const std::size_t start = pos_;
    while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
    return s_.substr(start, pos_ - start);
  }

  Block parse_entries(bool nested) {
    Block b;
    b.line = line_;
    std::set<std::string> seen;
    for (;;) {
      skip();
      if (pos_ >= s_.size()) {
        if (nested) error("missing '}'");
        return b;
      }
      if (s_[pos_] == '}') {
        if (!nested) error("unmatched '}'");
        ++pos_;
        return b;
      }
      const int key_line = line_;
      std::string key = identifier();
      if (!seen.insert(key).second) error("duplicate key '" + key + "'");
      skip();
      if (pos_ < s_.size() && s_[pos_] == '{') {
        ++pos_;
        Value v;
        v.kind = Value::Kind::block;
        v.line = key_line;
        v.block = std::make_shared<Block>(parse_entries(true));
        b.entries.emplace_back(std::move(key), std::move(v));
        continue;
      }
      if (pos_ >= s_.size() || s_[pos_] != '=') error("expected '=' or '{' after '" + key + "'");
      ++pos_;
      skip();
      b.entries.emplace_back(std::move(key), parse_value());
    }
  }

  Value parse_value() {
    Value v;
    v.line = line_;
    if (pos_ >= s_.size()) error("expected a value");
    const char c = s_[pos_];
    if (c == '[') {
      ++pos_;
      v.kind = Value::Kind::list;
      skip();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      for (;;) {
        skip();
        v.items.push_back(parse_value());
        skip();
        if (pos_ < s_.size() && s_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return v;
        }
        error("expected ',' or ']' in list");
      }
    }
    if (c == '"') {
      ++pos_;
      v.kind = Value::Kind::string;
      while (pos_ < s_.size() && s_[pos_] != '"') {
        if (s_[pos_] == '\n') error("unterminated string");
        if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
        v.text += s_[pos_++];
      }
      if (pos_ >= s_.size()) error("unterminated string");
      ++pos_;
      return v;
    }
    if (ident_start(c)) {
      v.kind = Value::Kind::identifier;
      v.text = identifier();
      if (v.text == "inf" || v.text == "nan") {
        v.kind = Value::Kind::number;
        parse_double(v.text, v.number);
        return v;
      }
      // `name{...}` and `name(k=v, ...)` are blocks whose kind is `name`
      if (pos_ < s_.size() && (s_[pos_] == '{' || s_[pos_] == '(')) {
        const bool paren = s_[pos_++] == '(';
        Block b = paren ? parse_call() : parse_entries(true);
        for (const auto& e : b.entries) {
          if (e.first == "kind") error("'" + v.text + "' already names the kind");
        }
        Value kind;
        kind.kind = Value::Kind::identifier;
        kind.text = v.text;
        kind.line = v.line;
        b.entries.insert(b.entries.begin(), {"kind", std::move(kind)});
        v.kind = Value::Kind::block;
        v.block = std::make_shared<Block>(std::move(b));
        v.text.clear();
      }
      return v;
    }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
                                s_[pos_] == '.' || s_[pos_] == '-' || s_[pos_] == '+')) {
      ++pos_;
    }
    v.text = s_.substr(start, pos_ - start);
    if (v.text.empty() || !parse_double(v.text, v.number)) error("bad value '" + v.text + "'");
    v.kind = Value::Kind::number;
    return v;
  }

  Block parse_call() {
    Block b;
    b.line = line_;
    std::set<std::string> seen;
    skip();
    if (pos_ < s_.size() && s_[pos_] == ')') {
      ++pos_;
      return b;
    }
    for (;;) {
      skip();
      std::string key = identifier();
      if (!seen.insert(key).second) error("duplicate key '" + key + "'");
      skip();
      if (pos_ >= s_.size() || s_[pos_] != '=') error("expected '=' after '" + key + "'");
      ++pos_;
      skip();
      b.entries.emplace_back(std::move(key), parse_value());
      skip();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (pos_ < s_.size() && s_[pos_] == ')') {
        ++pos_;
        return b;
      }
      error("expected ',' or ')'");
    }
  }

  std::string s_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace detail

inline Block parse(const std::string& text) { return detail::Parser(text).parse_file(); }

inline Block parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::validation, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

/// Typed access to one block. Every key read is marked; finish() rejects the
/// rest, so misspelled keys never go unnoticed.
class Reader {
 public:
  Reader(const Block& block, std::string path) : block_(&block), path_(std::move(path)) {}

  bool has(const std::string& key) const { return find(key) != nullptr; }

  const Value* find(const std::string& key) const {
    for (const auto& [k, v] : block_->entries) {
      if (k == key) return &v;
    }
    return nullptr;
  }

  const Value* take(const std::string& key) {
    const Value* v = find(key);
    if (v) used_.insert(key);
    return v;
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const Value* v = take(key);
    if (!v) return require(key, fallback);
    return as_number(*v, key);
  }

  std::size_t count(const std::string& key, std::optional<std::size_t> fallback = std::nullopt) {
    const Value* v = take(key);
    if (!v) {
      if (!fallback) missing(key);
      return *fallback;
    }
    const double x = as_number(*v, key);
    if (!(x >= 0) || x != std::floor(x) || x > 1e15) bad(key, *v, "a nonnegative integer");
    return static_cast<std::size_t>(x);
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    const Value* v = take(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::number || v->text.empty() || !std::isdigit(static_cast<unsigned char>(v->text[0]))) {
      bad(key, *v, "a nonnegative integer");
    }
    try {
      std::size_t used = 0;
      const auto x = std::stoull(v->text, &used);
      if (used != v->text.size()) bad(key, *v, "an integer");
      return x;
    } catch (const std::exception&) {
      bad(key, *v, "an integer");
    }
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const Value* v = take(key);
    if (!v) {
      if (!fallback) missing(key);
      return *fallback;
    }
    if (v->kind != Value::Kind::identifier && v->kind != Value::Kind::string) bad(key, *v, "a name or string");
    return v->text;
  }

  bool flag(const std::string& key, bool fallback) {
    const Value* v = take(key);
    if (!v) return fallback;
    if (v->kind == Value::Kind::identifier && (v->text == "true" || v->text == "false")) return v->text == "true";
    bad(key, *v, "true or false");
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
    const Value* v = take(key);
    if (!v) {
      if (!fallback) missing(key);
      return *fallback;
    }
    if (v->kind == Value::Kind::number) return {v->number};
    if (v->kind != Value::Kind::list) bad(key, *v, "a list of numbers");
    std::vector<double> out;
    for (const auto& it : v->items) out.push_back(as_number(it, key));
    return out;
  }

  std::vector<std::vector<double>> matrix(const std::string& key) {
    const Value* v = take(key);
    if (!v) missing(key);
    if (v->kind != Value::Kind::list) bad(key, *v, "a list of lists");
    std::vector<std::vector<double>> out;
    for (const auto& row : v->items) {
      if (row.kind != Value::Kind::list) bad(key, row, "a list of lists");
      std::vector<double> r;
      for (const auto& it : row.items) r.push_back(as_number(it, key));
      out.push_back(std::move(r));
    }
    return out;
  }

  std::optional<Reader> block(const std::string& key) {
    const Value* v = take(key);
    if (!v) return std::nullopt;
    if (v->kind != Value::Kind::block) bad(key, *v, "a block");
    return Reader(*v->block, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : block_->entries) {
      if (!used_.count(k)) {
        fail(ErrorKind::validation, "config line " + std::to_string(v.line) + ": unknown key '" +
                                        (path_.empty() ? k : path_ + "." + k) + "'");
      }
    }
  }

  const std::string& path() const { return path_; }

  [[noreturn]] void bad(const std::string& key, const Value& v, const std::string& want) const {
    fail(ErrorKind::validation, "config line " + std::to_string(v.line) + ": '" + qualified(key) +
                                    "' must be " + want);
  }

 private:
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void missing(const std::string& key) const {
    fail(ErrorKind::validation, "config: missing required key '" + qualified(key) + "'");
  }

  double require(const std::string& key, std::optional<double> fallback) const {
    if (!fallback) missing(key);
    return *fallback;
  }

  double as_number(const Value& v, const std::string& key) const {
    if (v.kind != Value::Kind::number) bad(key, v, "a number");
    return v.number;
  }

  const Block* block_;
  std::string path_;
  std::set<std::string> used_;
};

// ------------------------------------------------------------ run config

struct ReferenceSpec {
  std::string kind = "solve";  // solve | constant | csv
  std::vector<double> value;
  std::string path;
};

struct LocalizeSpec {
  double gamma = 0.5;
  std::vector<double> xi_constant;                // per component
  std::vector<std::vector<double>> xi_polynomial;  // coefficients in t, per component
};

struct ClusterSpec {
  double delta = 0.1;
  int levels = 8;
  std::optional<double> epsilon;  // also run the near-optimality witness search
};

struct WeakballSpec {
  double epsilon = 1e-4;
  int bank_degree = kDefaultBankDegree;
};

struct GrowthSpec {
  double delta = 0.2;
  std::vector<double> eta{0.01, 0.02, 0.05, 0.1, 0.2};
  std::size_t samples = 200;
};

struct StabilitySpec {
  double gamma = 0.5;
  std::vector<double> delta{0.01, 0.02, 0.05, 0.1};
  std::size_t samples = 50;
};

struct SubregSpec {
  double kappa = 0.3;
  std::size_t samples = 100;
  std::vector<double> residuals{1e-10, 0.01, 0.05};
};

struct GenericitySpec {
  std::vector<double> epsilon{0.1, 0.01};
  std::size_t samples = 100;
  std::size_t starts = 4;
  double defect_tol = 1e-9;
};

struct RegpathSpec {
  double p = 2.0;
  std::vector<double> eta{0.4, 0.2, 0.1, 0.05, 0.025};
};

struct GradcheckSpec {
  std::size_t directions = 20;
  double step = 1e-4;
  double tol = 1e-5;
  double corrupt = 0.0;  // relative corruption of the switching field (negative control)
};

struct RunConfig {
  ProblemPtr problem;
  std::string instance;
  ControlSet set = catalog::unit_box();
  MeshPtr mesh;
  SolveOptions solver;
  ReferenceSpec reference;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string out_dir = ".";

  LocalizeSpec localize;
  ClusterSpec cluster;
  WeakballSpec weakball;
  GrowthSpec growth;
  StabilitySpec stability;
  SubregSpec subreg;
  GenericitySpec genericity;
  RegpathSpec regpath;
  GradcheckSpec gradcheck;
};

namespace detail {

inline std::vector<std::string> strings(Reader& r, const std::string& key, bool required = true) {
  const Value* v = r.take(key);
  if (!v) {
    if (required) fail(ErrorKind::validation, "config: missing required key '" + key + "'");
    return {};
  }
  auto one = [&](const Value& x) {
    if (x.kind == Value::Kind::string || x.kind == Value::Kind::identifier) return x.text;
    if (x.kind == Value::Kind::number) return x.text;
    r.bad(key, x, "a string or a list of strings");
  };
  if (v->kind != Value::Kind::list) return {one(*v)};
  std::vector<std::string> out;
  for (const auto& it : v->items) out.push_back(one(it));
  return out;
}

inline ProblemPtr moment_problem(Reader& r, const std::string& name) {
  const std::size_t dim = r.count("dim", 1);
  const Value* wv = r.take("weights");
  if (!wv || wv->kind != Value::Kind::list) fail(ErrorKind::validation, "config: moment problem needs a weights list");
  std::vector<double> comps = r.numbers("components", std::vector<double>{});
  const auto domain = r.numbers("domain", std::vector<double>{0.0, 1.0});
  if (domain.size() != 2 || !(domain[0] < domain[1])) fail(ErrorKind::validation, "config: domain must be [a, b] with a < b");
  std::vector<MomentProblem::Weight> weights;
  for (std::size_t k = 0; k < wv->items.size(); ++k) {
    const Value& w = wv->items[k];
    const std::size_t comp = k < comps.size() ? static_cast<std::size_t>(comps[k]) : 0;
    if (w.kind == Value::Kind::list) {
      std::vector<double> coefs;
      for (const auto& c : w.items) {
        if (c.kind != Value::Kind::number) r.bad("weights", c, "coefficient lists or expressions in t");
        coefs.push_back(c.number);
      }
      weights.push_back(MomentProblem::polynomial_weight(coefs, comp));
    } else if (w.kind == Value::Kind::string) {
      auto expr = std::make_shared<Expression>(Expression::parse(w.text, {"t"}));
      weights.push_back({w.text, [expr](double t) { return expr->value(std::span<const double>(&t, 1)); }, comp});
    } else {
      r.bad("weights", w, "coefficient lists or expressions in t");
    }
  }
  if (!comps.empty() && comps.size() != weights.size()) {
    fail(ErrorKind::validation, "config: components must list one entry per weight");
  }
  std::vector<Polynomial::Term> terms;
  for (const auto& row : r.matrix("phi")) {
    if (row.size() != weights.size() + 1) {
      fail(ErrorKind::validation, "config: each phi term is [coef, one exponent per weight]");
    }
    std::vector<int> e;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] != std::floor(row[j])) fail(ErrorKind::validation, "config: phi exponents must be integers");
      e.push_back(static_cast<int>(row[j]));
    }
    terms.push_back({row[0], std::move(e)});
  }
  Polynomial outer(weights.size(), std::move(terms));
  return std::make_shared<MomentProblem>(name, dim, std::move(weights), std::move(outer),
                                         std::pair{domain[0], domain[1]});
}

inline ProblemPtr ode_problem(Reader& r, const std::string& name) {
  OdeSpec spec;
  spec.horizon = r.number("horizon", 1.0);
  spec.y0 = r.numbers("y0");
  const std::size_t n = spec.y0.size();
  if (n == 0 || n + 1 > kMaxExpressionVars) fail(ErrorKind::validation, "config: y0 must have 1..11 entries");
  spec.controls = r.count("controls", 1);
  for (const auto& e : strings(r, "drift")) spec.drift.push_back(expression_fn(e, n));
  const Value* fv = r.take("fields");
  if (!fv || fv->kind != Value::Kind::list) fail(ErrorKind::validation, "config: ode problem needs fields = [[...], ...]");
  for (const auto& row : fv->items) {
    std::vector<ScalarFn> f;
    if (row.kind != Value::Kind::list) r.bad("fields", row, "one list of expressions per control");
    for (const auto& e : row.items) {
      if (e.kind != Value::Kind::string && e.kind != Value::Kind::number) r.bad("fields", e, "expressions");
      f.push_back(expression_fn(e.text, n));
    }
    spec.control_fields.push_back(std::move(f));
  }
  spec.running_cost = expression_fn(r.text("running", "0"), n);
  for (const auto& e : strings(r, "control_costs", false)) spec.control_costs.push_back(expression_fn(e, n));
  spec.terminal_cost = expression_fn(r.text("terminal", "0"), n);
  return std::make_shared<OdeAffineProblem>(name, std::move(spec));
}

inline ProblemPtr elliptic_problem(Reader& r, const std::string& name) {
  EllipticSpec spec;
  spec.length = r.number("length", 1.0);
  spec.reaction = expression_fn(r.text("reaction", "0"), 1, "x");
  spec.tracking = expression_fn(r.text("tracking"), 1, "x");
  spec.ua = r.number("ua", -1.0);
  spec.ub = r.number("ub", 1.0);
  spec.newton_tol = r.number("newton_tol", 1e-12);
  spec.newton_max_iter = r.count("newton_max_iter", 100);
  return std::make_shared<EllipticProblem>(name, std::move(spec));
}

}  // namespace detail

inline RunConfig build(const Block& root) {
  RunConfig cfg;
  Reader r(root, "");
  cfg.seed = r.seed("seed", 0);
  cfg.threads = r.count("threads", 0);
  cfg.out_dir = r.text("out_dir", ".");

  const Value* pv = r.find("problem");
  if (!pv) fail(ErrorKind::validation, "config: missing required key 'problem'");
  if (pv->kind == Value::Kind::block) {
    Reader p = *r.block("problem");
    const std::string kind = p.text("kind");
    cfg.instance = p.text("name", kind);
    if (kind == "moment") {
      cfg.problem = detail::moment_problem(p, cfg.instance);
    } else if (kind == "ode") {
      cfg.problem = detail::ode_problem(p, cfg.instance);
    } else if (kind == "elliptic") {
      cfg.problem = detail::elliptic_problem(p, cfg.instance);
    } else {
      fail(ErrorKind::validation, "config: problem.kind must be moment, ode or elliptic");
    }
    p.finish();
  } else {
    cfg.instance = r.text("problem");
    cfg.problem = catalog::by_name(cfg.instance);
  }
  const std::size_t m = cfg.problem->control_dim();

  if (auto s = r.block("set")) {
    const std::string kind = s->text("kind", "box");
    if (kind == "box") {
      cfg.set = ControlSet::box(s->numbers("lo"), s->numbers("hi"));
    } else if (kind == "polytope") {
      cfg.set = ControlSet::polytope(s->matrix("vertices"));
    } else {
      fail(ErrorKind::validation, "config: set.kind must be box or polytope");
    }
    s->finish();
  } else if (auto e = std::dynamic_pointer_cast<const EllipticProblem>(cfg.problem)) {
    cfg.set = ControlSet::box(Vec{e->spec().ua}, Vec{e->spec().ub});
  } else {
    cfg.set = ControlSet::box(Vec(m, -1.0), Vec(m, 1.0));
  }
  if (cfg.set.dim() != m) fail(ErrorKind::validation, "config: set dimension differs from the problem's control dimension");
  if (auto e = std::dynamic_pointer_cast<const EllipticProblem>(cfg.problem)) {
    const auto& es = e->spec();
    if (!cfg.set.is_box() || cfg.set.as_box().lo[0] != es.ua || cfg.set.as_box().hi[0] != es.ub) {
      fail(ErrorKind::validation, "config: elliptic problems use the box [ua, ub] as control set");
    }
  }

  {
    const auto [da, db] = cfg.problem->domain();
    std::size_t cells = 256;
    double a = da, b = db;
    int refine = 0;
    if (auto mb = r.block("mesh")) {
      cells = mb->count("cells", 256);
      a = mb->number("a", da);
      b = mb->number("b", db);
      refine = static_cast<int>(mb->count("refine", 0));
      mb->finish();
    }
    if (cells < 1) fail(ErrorKind::validation, "config: mesh.cells must be >= 1");
    if (!(a < b)) fail(ErrorKind::validation, "config: mesh needs a < b");
    cfg.mesh = Mesh1D::uniform(a, b, cells);
    if (refine > 0) cfg.mesh = cfg.mesh->refined(refine);
  }

  if (auto s = r.block("solver")) {
    cfg.solver.max_iter = s->count("max_iter", 5000);
    cfg.solver.tol_gap = s->number("tol_gap", 1e-8);
    cfg.solver.tol_residual = s->number("tol_residual", 0.0);
    const std::string ls = s->text("line_search", "golden");
    if (ls == "golden") {
      cfg.solver.line_search = LineSearch::golden;
    } else if (ls == "armijo") {
      cfg.solver.line_search = LineSearch::armijo;
    } else {
      fail(ErrorKind::validation, "config: solver.line_search must be golden or armijo");
    }
    cfg.solver.golden_iters = static_cast<int>(s->count("golden_iters", 60));
    cfg.solver.keep_trace = s->flag("trace", true);
    s->finish();
  }
  cfg.solver.validate();

  if (auto s = r.block("reference")) {
    cfg.reference.kind = s->text("kind", "solve");
    if (cfg.reference.kind == "constant") {
      cfg.reference.value = s->numbers("value");
      if (cfg.reference.value.size() != m) fail(ErrorKind::validation, "config: reference.value needs one entry per component");
    } else if (cfg.reference.kind == "csv") {
      cfg.reference.path = s->text("path");
    } else if (cfg.reference.kind != "solve") {
      fail(ErrorKind::validation, "config: reference.kind must be solve, constant or csv");
    }
    s->finish();
  }

  if (auto s = r.block("localize")) {
    cfg.localize.gamma = s->number("gamma", 0.5);
    cfg.localize.xi_constant = s->numbers("xi", std::vector<double>{});
    if (s->has("xi_polynomial")) cfg.localize.xi_polynomial = s->matrix("xi_polynomial");
    s->finish();
  }
  if (auto s = r.block("cluster")) {
    cfg.cluster.delta = s->number("delta", 0.1);
    cfg.cluster.levels = static_cast<int>(s->count("levels", 8));
    if (s->has("epsilon")) cfg.cluster.epsilon = s->number("epsilon");
    s->finish();
  }
  if (auto s = r.block("weakball")) {
    cfg.weakball.epsilon = s->number("epsilon", 1e-4);
    cfg.weakball.bank_degree = static_cast<int>(s->count("bank_degree", kDefaultBankDegree));
    s->finish();
  }
  if (auto s = r.block("growth")) {
    cfg.growth.delta = s->number("delta", 0.2);
    cfg.growth.eta = s->numbers("eta", cfg.growth.eta);
    cfg.growth.samples = s->count("samples", 200);
    s->finish();
  }
  if (auto s = r.block("stability")) {
    cfg.stability.gamma = s->number("gamma", 0.5);
    cfg.stability.delta = s->numbers("delta", cfg.stability.delta);
    cfg.stability.samples = s->count("samples", 50);
    s->finish();
  }
  if (auto s = r.block("subreg")) {
    cfg.subreg.kappa = s->number("kappa", 0.3);
    cfg.subreg.samples = s->count("samples", 100);
    cfg.subreg.residuals = s->numbers("residuals", cfg.subreg.residuals);
    s->finish();
  }
  if (auto s = r.block("genericity")) {
    cfg.genericity.epsilon = s->numbers("epsilon", cfg.genericity.epsilon);
    cfg.genericity.samples = s->count("samples", 100);
    cfg.genericity.starts = s->count("starts", 4);
    cfg.genericity.defect_tol = s->number("defect_tol", 1e-9);
    s->finish();
  }
  if (auto s = r.block("regpath")) {
    cfg.regpath.p = s->number("p", 2.0);
    cfg.regpath.eta = s->numbers("eta", cfg.regpath.eta);
    s->finish();
  }
  if (auto s = r.block("gradcheck")) {
    cfg.gradcheck.directions = s->count("directions", 20);
    cfg.gradcheck.step = s->number("step", 1e-4);
    cfg.gradcheck.tol = s->number("tol", 1e-5);
    cfg.gradcheck.corrupt = s->number("corrupt", 0.0);
    s->finish();
  }
  r.take("problem");
  r.finish();
  return cfg;
}

inline RunConfig load(const std::string& path) { return build(parse_file(path)); }

}  // namespace bangbang::config
