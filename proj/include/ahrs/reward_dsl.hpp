#pragma once

// Arithmetic expression language for auxiliary rewards. Formulas supplied as
// text (typically authored by an LLM) are parsed once and evaluated per step
// against named observation fields, so no generated native code ever runs.
//
// Grammar (recursive descent):
//   expr   := term (("+" | "-") term)*
//   term   := unary (("*" | "/") unary)*
//   unary  := "-" unary | power
//   power  := atom ("^" unary)?          -- right-associative
//   atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"
//
// "^" binds tighter than unary minus: -2^2 == -(2^2) == -4.
// Functions: exp/1, log/1, tanh/1, abs/1, sqrt/1, min/2, max/2, clamp/3.
// Identifiers: [a-z_][a-z0-9_]*. Numbers: decimal with optional fraction
// and exponent.

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ahrs/common.hpp"

namespace ahrs::dsl {

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Number {
  double value;
};
struct Variable {
  std::string name;
};
struct UnaryNeg {
  ExprPtr child;
};
struct Binary {
  char op;  // one of + - * / ^
  ExprPtr left;
  ExprPtr right;
};
struct Call {
  std::string func;
  std::vector<ExprPtr> args;
};

struct Expr {
  std::variant<Number, Variable, UnaryNeg, Binary, Call> node;
};

using Bindings = std::map<std::string, double>;

inline const std::map<std::string, int>& function_table() {
  static const std::map<std::string, int> table = {
      {"exp", 1}, {"log", 1}, {"tanh", 1},  {"abs", 1},
      {"sqrt", 1}, {"min", 2}, {"max", 2}, {"clamp", 3},
  };
  return table;
}

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExprPtr parse() {
    auto e = parse_expr();
    skip_ws();
    if (pos_ < text_.size())
      fail(Errc::syntax_error,
           strprintf("unexpected '%c' at offset %zu", text_[pos_], pos_));
    return e;
  }

 private:
  std::string_view text_;
  size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
            text_[pos_] == '\r'))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  [[noreturn]] void expected(const std::string& what) {
    fail(Errc::syntax_error,
         strprintf("expected %s at offset %zu", what.c_str(), pos_));
  }

  ExprPtr parse_expr() {
    auto left = parse_term();
    for (;;) {
      char c = peek();
      if (c != '+' && c != '-') return left;
      ++pos_;
      auto right = parse_term();
      left = std::make_unique<Expr>(
          Expr{Binary{c, std::move(left), std::move(right)}});
    }
  }

  ExprPtr parse_term() {
    auto left = parse_unary();
    for (;;) {
      char c = peek();
      if (c != '*' && c != '/') return left;
      ++pos_;
      auto right = parse_unary();
      left = std::make_unique<Expr>(
          Expr{Binary{c, std::move(left), std::move(right)}});
    }
  }

  ExprPtr parse_unary() {
    if (eat('-'))
      return std::make_unique<Expr>(Expr{UnaryNeg{parse_unary()}});
    return parse_power();
  }

  ExprPtr parse_power() {
    auto base = parse_atom();
    if (eat('^')) {
      auto exponent = parse_unary();  // right-associative, allows 2^-3
      return std::make_unique<Expr>(
          Expr{Binary{'^', std::move(base), std::move(exponent)}});
    }
    return base;
  }

  ExprPtr parse_atom() {
    char c = peek();
    if (c == '(') {
      ++pos_;
      auto e = parse_expr();
      if (!eat(')')) expected("')'");
      return e;
    }
    if (c >= '0' && c <= '9') return parse_number();
    if ((c >= 'a' && c <= 'z') || c == '_') return parse_ident();
    expected("a number, identifier, or '('");
  }

  ExprPtr parse_number() {
    size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9')
      ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9')
        ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      size_t mark = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-'))
        ++pos_;
      if (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
        while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9')
          ++pos_;
      } else {
        pos_ = mark;  // trailing 'e' belongs to something else; not ours
      }
    }
    double v = std::strtod(std::string(text_.substr(start, pos_ - start)).c_str(),
                           nullptr);
    return std::make_unique<Expr>(Expr{Number{v}});
  }

  ExprPtr parse_ident() {
    size_t start = pos_;
    while (pos_ < text_.size() &&
           ((text_[pos_] >= 'a' && text_[pos_] <= 'z') ||
            (text_[pos_] >= '0' && text_[pos_] <= '9') || text_[pos_] == '_'))
      ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    if (peek() != '(')
      return std::make_unique<Expr>(Expr{Variable{std::move(name)}});

    auto it = function_table().find(name);
    if (it == function_table().end())
      fail(Errc::unknown_function,
           strprintf("'%s' at offset %zu", name.c_str(), start));
    ++pos_;  // consume '('
    std::vector<ExprPtr> args;
    args.push_back(parse_expr());
    while (eat(',')) args.push_back(parse_expr());
    if (!eat(')')) expected("')'");
    if (static_cast<int>(args.size()) != it->second)
      fail(Errc::arity_mismatch,
           strprintf("%s takes %d argument(s), got %zu", name.c_str(),
                     it->second, args.size()));
    return std::make_unique<Expr>(Expr{Call{std::move(name), std::move(args)}});
  }
};

inline double checked(double v, const std::string& what) {
  if (!std::isfinite(v)) fail(Errc::non_finite_result, what);
  return v;
}

}  // namespace detail

inline ExprPtr parse_expr(std::string_view text) {
  return detail::Parser(text).parse();
}

inline double eval_expr(const Expr& ast, const Bindings& bindings) {
  using detail::checked;
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Number>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, Variable>) {
          auto it = bindings.find(n.name);
          if (it == bindings.end()) fail(Errc::unbound_variable, n.name);
          return it->second;
        } else if constexpr (std::is_same_v<T, UnaryNeg>) {
          return -eval_expr(*n.child, bindings);
        } else if constexpr (std::is_same_v<T, Binary>) {
          double a = eval_expr(*n.left, bindings);
          double b = eval_expr(*n.right, bindings);
          switch (n.op) {
            case '+': return checked(a + b, "addition overflow");
            case '-': return checked(a - b, "subtraction overflow");
            case '*': return checked(a * b, "multiplication overflow");
            case '/': return checked(a / b, "division by zero or overflow");
            case '^': return checked(std::pow(a, b), "pow out of domain");
          }
          fail(Errc::syntax_error, "corrupt ast");
        } else {  // Call
          std::vector<double> a;
          a.reserve(n.args.size());
          for (const auto& arg : n.args) a.push_back(eval_expr(*arg, bindings));
          if (n.func == "exp") return checked(std::exp(a[0]), "exp overflow");
          if (n.func == "log")
            return checked(std::log(a[0]), "log of non-positive");
          if (n.func == "tanh") return std::tanh(a[0]);
          if (n.func == "abs") return std::fabs(a[0]);
          if (n.func == "sqrt")
            return checked(std::sqrt(a[0]), "sqrt of negative");
          if (n.func == "min") return std::min(a[0], a[1]);
          if (n.func == "max") return std::max(a[0], a[1]);
          if (n.func == "clamp") return std::min(std::max(a[0], a[1]), a[2]);
          fail(Errc::unknown_function, n.func);
        }
      },
      ast.node);
}

inline void collect_free_vars(const Expr& ast, std::set<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Variable>) {
          out.insert(n.name);
        } else if constexpr (std::is_same_v<T, UnaryNeg>) {
          collect_free_vars(*n.child, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect_free_vars(*n.left, out);
          collect_free_vars(*n.right, out);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& arg : n.args) collect_free_vars(*arg, out);
        }
      },
      ast.node);
}

inline std::set<std::string> free_vars(const Expr& ast) {
  std::set<std::string> out;
  collect_free_vars(ast, out);
  return out;
}

// Fully parenthesized rendering; parse(print(ast)) evaluates identically.
inline std::string print_expr(const Expr& ast) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Number>) {
          // Negative literals only arise in hand-built ASTs; parenthesize so
          // "-2" below a '^' cannot rebind as -(2^...) on reparse.
          std::string s = format_sig(n.value, 17);
          return n.value < 0 ? "(" + s + ")" : s;
        } else if constexpr (std::is_same_v<T, Variable>) {
          return n.name;
        } else if constexpr (std::is_same_v<T, UnaryNeg>) {
          return "(-" + print_expr(*n.child) + ")";
        } else if constexpr (std::is_same_v<T, Binary>) {
          return "(" + print_expr(*n.left) + std::string(1, n.op) +
                 print_expr(*n.right) + ")";
        } else {
          std::string s = n.func + "(";
          for (size_t i = 0; i < n.args.size(); ++i) {
            if (i) s += ",";
            s += print_expr(*n.args[i]);
          }
          return s + ")";
        }
      },
      ast.node);
}

}  // namespace ahrs::dsl
