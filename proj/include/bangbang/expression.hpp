#pragma once

// Small arithmetic expressions for user-supplied dynamics and costs.
// Grammar: + - * / ^, unary minus, parentheses, numbers, named variables and
// the functions sin cos tan exp log sqrt tanh abs pow(a,b). Evaluation is
// forward-mode: every call returns the value and the exact gradient with
// respect to all variables.

#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bangbang/error.hpp"
#include "bangbang/numeric.hpp"

namespace bangbang {

inline constexpr std::size_t kMaxExpressionVars = 12;

struct Dual {
  double v = 0.0;
  std::array<double, kMaxExpressionVars> g{};
};

class Expression {
 public:
  /// `names[k]` binds variable k; `aliases` adds extra spellings for an index.
  static Expression parse(const std::string& text, const std::vector<std::string>& names,
                          const std::vector<std::pair<std::string, std::size_t>>& aliases = {}) {
    if (names.size() > kMaxExpressionVars) {
      fail(ErrorKind::validation, "too many expression variables");
    }
    Parser p{text, 0, names, aliases};
    Expression e;
    e.text_ = text;
    e.nvars_ = names.size();
    e.root_ = p.parse_expr();
    p.skip_ws();
    if (p.pos != text.size()) {
      fail(ErrorKind::validation, "unexpected '" + text.substr(p.pos, 1) + "' in expression: " + text);
    }
    return e;
  }

  static Expression constant(double c, std::size_t nvars) {
    Expression e;
    e.text_ = format_double(c);
    e.nvars_ = nvars;
    auto n = std::make_shared<Node>();
    n->op = Op::number;
    n->value = c;
    e.root_ = n;
    return e;
  }

  const std::string& text() const { return text_; }
  std::size_t variables() const { return nvars_; }

  double value(std::span<const double> vars) const {
    return eval(*root_, vars).v;
  }

  /// Value; writes d/dvar_k into grad[k] for k < grad.size().
  double eval(std::span<const double> vars, std::span<double> grad) const {
    const Dual d = eval(*root_, vars);
    for (std::size_t k = 0; k < grad.size() && k < nvars_; ++k) grad[k] = d.g[k];
    return d.v;
  }

 private:
  enum class Op { number, var, add, sub, mul, div, pow, neg, call };
  enum class Fn { sin, cos, tan, exp, log, sqrt, tanh, abs, pow };

  struct Node {
    Op op = Op::number;
    double value = 0.0;
    std::size_t var = 0;
    Fn fn = Fn::sin;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
  };
  using NodePtr = std::shared_ptr<const Node>;

  struct Parser {
    const std::string& s;
    std::size_t pos;
    const std::vector<std::string>& names;
    const std::vector<std::pair<std::string, std::size_t>>& aliases;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    [[noreturn]] void error(const std::string& what) {
      fail(ErrorKind::validation, what + " at position " + std::to_string(pos) + " in: " + s);
    }
    static NodePtr binary(Op op, NodePtr a, NodePtr b) {
      auto n = std::make_shared<Node>();
      n->op = op;
      n->a = std::move(a);
      n->b = std::move(b);
      return n;
    }
    NodePtr parse_expr() {
      NodePtr lhs = parse_term();
      while (true) {
        if (eat('+')) {
          lhs = binary(Op::add, lhs, parse_term());
        } else if (eat('-')) {
          lhs = binary(Op::sub, lhs, parse_term());
        } else {
          return lhs;
        }
      }
    }
    NodePtr parse_term() {
      NodePtr lhs = parse_unary();
      while (true) {
        if (eat('*')) {
          lhs = binary(Op::mul, lhs, parse_unary());
        } else if (eat('/')) {
          lhs = binary(Op::div, lhs, parse_unary());
        } else {
          return lhs;
        }
      }
    }
    NodePtr parse_unary() {
      if (eat('-')) {
        auto n = std::make_shared<Node>();
        n->op = Op::neg;
        n->a = parse_unary();
        return n;
      }
      if (eat('+')) return parse_unary();
      return parse_power();
    }
    NodePtr parse_power() {
      NodePtr base = parse_primary();
      if (eat('^')) return binary(Op::pow, base, parse_unary());
      return base;
    }
    NodePtr parse_primary() {
      skip_ws();
      if (pos >= s.size()) error("unexpected end of expression");
      if (eat('(')) {
        NodePtr e = parse_expr();
        if (!eat(')')) error("expected ')'");
        return e;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t end = pos;
        while (end < s.size() &&
               (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.')) {
          ++end;
        }
        if (end < s.size() && (s[end] == 'e' || s[end] == 'E')) {
          std::size_t k = end + 1;
          if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
          if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
            end = k;
            while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
          }
        }
        double v = 0;
        if (!parse_double(std::string_view(s).substr(pos, end - pos), v)) error("bad number");
        pos = end;
        auto n = std::make_shared<Node>();
        n->op = Op::number;
        n->value = v;
        return n;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t end = pos;
        while (end < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[end])) || s[end] == '_')) {
          ++end;
        }
        const std::string id = s.substr(pos, end - pos);
        pos = end;
        if (eat('(')) return parse_call(id);
        for (std::size_t k = 0; k < names.size(); ++k) {
          if (names[k] == id) return variable(k);
        }
        for (const auto& [alias, k] : aliases) {
          if (alias == id) return variable(k);
        }
        if (id == "pi") {
          auto n = std::make_shared<Node>();
          n->value = 3.14159265358979323846;
          return n;
        }
        error("unknown identifier '" + id + "'");
      }
      error(std::string("unexpected '") + c + "'");
    }
    static NodePtr variable(std::size_t k) {
      auto n = std::make_shared<Node>();
      n->op = Op::var;
      n->var = k;
      return n;
    }
    NodePtr parse_call(const std::string& id) {
      static const std::vector<std::pair<std::string, Fn>> table = {
          {"sin", Fn::sin}, {"cos", Fn::cos},   {"tan", Fn::tan},   {"exp", Fn::exp},
          {"log", Fn::log}, {"sqrt", Fn::sqrt}, {"tanh", Fn::tanh}, {"abs", Fn::abs},
          {"pow", Fn::pow}};
      auto n = std::make_shared<Node>();
      n->op = Op::call;
      bool found = false;
      for (const auto& [name, fn] : table) {
        if (name == id) {
          n->fn = fn;
          found = true;
        }
      }
      if (!found) error("unknown function '" + id + "'");
      n->a = parse_expr();
      if (n->fn == Fn::pow) {
        if (!eat(',')) error("pow needs two arguments");
        n->b = parse_expr();
      }
      if (!eat(')')) error("expected ')'");
      return n;
    }
  };

  Dual eval(const Node& n, std::span<const double> vars) const {
    Dual r;
    switch (n.op) {
      case Op::number:
        r.v = n.value;
        return r;
      case Op::var:
        if (n.var >= vars.size()) fail(ErrorKind::validation, "expression variable out of range");
        r.v = vars[n.var];
        r.g[n.var] = 1.0;
        return r;
      case Op::neg: {
        r = eval(*n.a, vars);
        r.v = -r.v;
        for (auto& g : r.g) g = -g;
        return r;
      }
      case Op::add:
      case Op::sub:
      case Op::mul:
      case Op::div:
      case Op::pow:
        return binary(n.op, eval(*n.a, vars), eval(*n.b, vars));
      case Op::call: {
        const Dual a = eval(*n.a, vars);
        if (n.fn == Fn::pow) return binary(Op::pow, a, eval(*n.b, vars));
        double v = 0, dv = 0;
        switch (n.fn) {
          case Fn::sin: v = std::sin(a.v); dv = std::cos(a.v); break;
          case Fn::cos: v = std::cos(a.v); dv = -std::sin(a.v); break;
          case Fn::tan: v = std::tan(a.v); dv = 1.0 + v * v; break;
          case Fn::exp: v = std::exp(a.v); dv = v; break;
          case Fn::log: v = std::log(a.v); dv = 1.0 / a.v; break;
          case Fn::sqrt: v = std::sqrt(a.v); dv = 0.5 / v; break;
          case Fn::tanh: v = std::tanh(a.v); dv = 1.0 - v * v; break;
          case Fn::abs: v = std::abs(a.v); dv = a.v > 0 ? 1.0 : (a.v < 0 ? -1.0 : 0.0); break;
          case Fn::pow: break;
        }
        r.v = v;
        for (std::size_t k = 0; k < nvars_; ++k) r.g[k] = dv * a.g[k];
        return r;
      }
    }
    return r;
  }

  Dual binary(Op op, const Dual& a, const Dual& b) const {
    Dual r;
    switch (op) {
      case Op::add:
        r.v = a.v + b.v;
        for (std::size_t k = 0; k < nvars_; ++k) r.g[k] = a.g[k] + b.g[k];
        break;
      case Op::sub:
        r.v = a.v - b.v;
        for (std::size_t k = 0; k < nvars_; ++k) r.g[k] = a.g[k] - b.g[k];
        break;
      case Op::mul:
        r.v = a.v * b.v;
        for (std::size_t k = 0; k < nvars_; ++k) r.g[k] = a.g[k] * b.v + a.v * b.g[k];
        break;
      case Op::div:
        r.v = a.v / b.v;
        for (std::size_t k = 0; k < nvars_; ++k) r.g[k] = (a.g[k] - r.v * b.g[k]) / b.v;
        break;
      case Op::pow: {
        bool const_exp = true;
        for (std::size_t k = 0; k < nvars_; ++k) const_exp = const_exp && b.g[k] == 0.0;
        r.v = std::pow(a.v, b.v);
        if (const_exp) {
          const double d = b.v == 0.0 ? 0.0 : b.v * std::pow(a.v, b.v - 1.0);
          for (std::size_t k = 0; k < nvars_; ++k) r.g[k] = d * a.g[k];
        } else {
          const double la = std::log(a.v);
          for (std::size_t k = 0; k < nvars_; ++k) {
            r.g[k] = r.v * (b.g[k] * la + b.v * a.g[k] / a.v);
          }
        }
        break;
      }
      default:
        break;
    }
    return r;
  }

  std::string text_;
  std::size_t nvars_ = 0;
  NodePtr root_;
};

}  // namespace bangbang
