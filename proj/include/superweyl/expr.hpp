#pragma once

// Scalar expression DSL: parsing, symbolic differentiation, best-effort
// simplification, numeric evaluation.  The coefficient language for metric
// components and form fields.
//
// Grammar:
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := "-" factor | power
//   power  := atom ("^" factor)?          (right-associative, binds above -)
//   atom   := number | ident | ident "(" expr ")" | "(" expr ")"
// No implicit multiplication.  Reserved: pi and the function names.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace superweyl {

struct ExprError : std::runtime_error {
  explicit ExprError(const std::string& m) : std::runtime_error(m) {}
};
struct ParseError : ExprError {
  size_t offset;
  ParseError(const std::string& m, size_t off)
      : ExprError(m + " at offset " + std::to_string(off)), offset(off) {}
};
struct EvalError : ExprError {
  explicit EvalError(const std::string& m) : ExprError(m) {}
};

enum class Fn { sin, cos, tan, sinh, cosh, tanh, exp, log, sqrt };

inline const char* fn_name(Fn f) {
  switch (f) {
    case Fn::sin: return "sin";
    case Fn::cos: return "cos";
    case Fn::tan: return "tan";
    case Fn::sinh: return "sinh";
    case Fn::cosh: return "cosh";
    case Fn::tanh: return "tanh";
    case Fn::exp: return "exp";
    case Fn::log: return "log";
    case Fn::sqrt: return "sqrt";
  }
  return "?";
}

class Expr {
  enum class K : std::uint8_t { Num, Var, Pi, Add, Sub, Mul, Div, Pow, Neg, App };

  struct Node {
    K kind;
    double num = 0;
    std::string var;
    Fn fn = Fn::sin;
    std::shared_ptr<const Node> a, b;
  };
  using P = std::shared_ptr<const Node>;

  P n_;
  explicit Expr(P n) : n_(std::move(n)) {}

  static P mk(K k) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    return n;
  }

 public:
  Expr() : Expr(number(0)) {}

  static Expr number(double v) {
    auto n = std::make_shared<Node>();
    n->kind = K::Num;
    n->num = v;
    return Expr(std::move(n));
  }
  static Expr var(std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = K::Var;
    n->var = std::move(name);
    return Expr(std::move(n));
  }
  static Expr pi() {
    auto n = std::make_shared<Node>();
    n->kind = K::Pi;
    return Expr(std::move(n));
  }
  static Expr apply(Fn f, Expr arg) {
    auto n = std::make_shared<Node>();
    n->kind = K::App;
    n->fn = f;
    n->a = arg.n_;
    return Expr(std::move(n));
  }

  bool is_num() const { return n_->kind == K::Num; }
  bool is_num(double v) const { return n_->kind == K::Num && n_->num == v; }
  double num_value() const { return n_->num; }

  // light folds keep zero/one detection useful for multivector coefficients
  friend Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_num(0)) return b;
    if (b.is_num(0)) return a;
    if (a.is_num() && b.is_num()) return number(a.n_->num + b.n_->num);
    return bin(K::Add, a, b);
  }
  friend Expr operator-(const Expr& a, const Expr& b) {
    if (b.is_num(0)) return a;
    if (a.is_num() && b.is_num()) return number(a.n_->num - b.n_->num);
    return bin(K::Sub, a, b);
  }
  friend Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_num(0) || b.is_num(0)) return number(0);
    if (a.is_num(1)) return b;
    if (b.is_num(1)) return a;
    if (a.is_num() && b.is_num()) return number(a.n_->num * b.n_->num);
    return bin(K::Mul, a, b);
  }
  friend Expr operator/(const Expr& a, const Expr& b) {
    if (a.is_num(0) && !b.is_num(0)) return number(0);
    if (b.is_num(1)) return a;
    return bin(K::Div, a, b);
  }
  friend Expr operator-(const Expr& a) {
    if (a.is_num()) return number(-a.n_->num);
    if (a.n_->kind == K::Neg) return Expr(a.n_->a);
    auto n = mk(K::Neg);
    const_cast<Node*>(n.get())->a = a.n_;
    return Expr(n);
  }
  Expr pow(const Expr& e) const {
    if (e.is_num(1)) return *this;
    if (e.is_num(0)) return number(1);
    return bin(K::Pow, *this, e);
  }

  friend bool operator==(const Expr& a, const Expr& b) { return structural_eq(a.n_, b.n_); }
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

  // ---- evaluation -------------------------------------------------------
  double evaluate(const std::map<std::string, double>& env) const { return eval(n_.get(), env); }

  // ---- differentiation --------------------------------------------------
  Expr differentiate(const std::string& v) const { return Expr(diff(n_.get(), v)).simplify(); }

  // ---- simplification (best effort, semantics preserving) ---------------
  Expr simplify() const { return Expr(simp(n_.get())); }

  // free variables
  void collect_vars(std::vector<std::string>& out) const { vars(n_.get(), out); }

  std::string str() const {
    std::ostringstream os;
    print(n_.get(), os, 0);
    return os.str();
  }

  static Expr parse(const std::string& text);

  // compile against a fixed variable ordering for fast repeated evaluation
  struct Compiled;
  Compiled compile(const std::vector<std::string>& varorder) const;

 private:
  static Expr bin(K k, const Expr& a, const Expr& b) {
    auto n = mk(k);
    auto* w = const_cast<Node*>(n.get());
    w->a = a.n_;
    w->b = b.n_;
    return Expr(n);
  }

  static bool structural_eq(const P& a, const P& b) {
    if (a == b) return true;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
      case K::Num: return a->num == b->num;
      case K::Var: return a->var == b->var;
      case K::Pi: return true;
      case K::Neg: return structural_eq(a->a, b->a);
      case K::App: return a->fn == b->fn && structural_eq(a->a, b->a);
      default: return structural_eq(a->a, b->a) && structural_eq(a->b, b->b);
    }
  }

  static double eval(const Node* n, const std::map<std::string, double>& env) {
    switch (n->kind) {
      case K::Num: return n->num;
      case K::Pi: return M_PI;
      case K::Var: {
        auto it = env.find(n->var);
        if (it == env.end()) throw EvalError("unbound variable: " + n->var);
        return it->second;
      }
      case K::Add: return eval(n->a.get(), env) + eval(n->b.get(), env);
      case K::Sub: return eval(n->a.get(), env) - eval(n->b.get(), env);
      case K::Mul: return eval(n->a.get(), env) * eval(n->b.get(), env);
      case K::Div: {
        double d = eval(n->b.get(), env);
        if (d == 0) throw EvalError("division by zero");
        return eval(n->a.get(), env) / d;
      }
      case K::Pow: {
        double base = eval(n->a.get(), env), e = eval(n->b.get(), env);
        double r = std::pow(base, e);
        if (!std::isfinite(r)) throw EvalError("pow domain error");
        return r;
      }
      case K::Neg: return -eval(n->a.get(), env);
      case K::App: {
        double x = eval(n->a.get(), env);
        return apply_fn(n->fn, x);
      }
    }
    throw EvalError("corrupt expression");
  }

  static double apply_fn(Fn f, double x) {
    switch (f) {
      case Fn::sin: return std::sin(x);
      case Fn::cos: return std::cos(x);
      case Fn::tan: return std::tan(x);
      case Fn::sinh: return std::sinh(x);
      case Fn::cosh: return std::cosh(x);
      case Fn::tanh: return std::tanh(x);
      case Fn::exp: return std::exp(x);
      case Fn::log:
        if (x <= 0) throw EvalError("log of non-positive value");
        return std::log(x);
      case Fn::sqrt:
        if (x < 0) throw EvalError("sqrt of negative value");
        return std::sqrt(x);
    }
    throw EvalError("unknown function");
  }

  static P diff(const Node* n, const std::string& v) {
    switch (n->kind) {
      case K::Num:
      case K::Pi: return number(0).n_;
      case K::Var: return number(n->var == v ? 1 : 0).n_;
      case K::Add: return (Expr(diff(n->a.get(), v)) + Expr(diff(n->b.get(), v))).n_;
      case K::Sub: return (Expr(diff(n->a.get(), v)) - Expr(diff(n->b.get(), v))).n_;
      case K::Mul: {
        Expr a(n->a), b(n->b);
        return (Expr(diff(n->a.get(), v)) * b + a * Expr(diff(n->b.get(), v))).n_;
      }
      case K::Div: {
        Expr a(n->a), b(n->b);
        return ((Expr(diff(n->a.get(), v)) * b - a * Expr(diff(n->b.get(), v))) / (b * b)).n_;
      }
      case K::Pow: {
        Expr a(n->a), b(n->b), da(diff(n->a.get(), v));
        if (n->b->kind == K::Num) {
          double e = n->b->num;
          return (number(e) * a.pow(number(e - 1)) * da).n_;
        }
        // general: d(a^b) = a^b (b' log a + b a'/a)
        Expr db(diff(n->b.get(), v));
        return (a.pow(b) * (db * apply(Fn::log, a) + b * da / a)).n_;
      }
      case K::Neg: return (-Expr(diff(n->a.get(), v))).n_;
      case K::App: {
        Expr u(n->a), du(diff(n->a.get(), v));
        switch (n->fn) {
          case Fn::sin: return (apply(Fn::cos, u) * du).n_;
          case Fn::cos: return (-(apply(Fn::sin, u) * du)).n_;
          case Fn::tan: return (du / apply(Fn::cos, u).pow(number(2))).n_;
          case Fn::sinh: return (apply(Fn::cosh, u) * du).n_;
          case Fn::cosh: return (apply(Fn::sinh, u) * du).n_;
          case Fn::tanh: return (du / apply(Fn::cosh, u).pow(number(2))).n_;
          case Fn::exp: return (apply(Fn::exp, u) * du).n_;
          case Fn::log: return (du / u).n_;
          case Fn::sqrt: return (du / (number(2) * apply(Fn::sqrt, u))).n_;
        }
        break;
      }
    }
    throw ExprError("corrupt expression in differentiate");
  }

  static P simp(const Node* n) {
    switch (n->kind) {
      case K::Num:
      case K::Pi:
      case K::Var: return clone(n);
      case K::Neg: {
        Expr a(simp(n->a.get()));
        return (-a).n_;
      }
      case K::App: {
        Expr a(simp(n->a.get()));
        if (a.is_num()) {
          try {
            return number(apply_fn(n->fn, a.num_value())).n_;
          } catch (const EvalError&) { /* keep symbolic */ }
        }
        return apply(n->fn, a).n_;
      }
      case K::Add: return (Expr(simp(n->a.get())) + Expr(simp(n->b.get()))).n_;
      case K::Sub: {
        Expr a(simp(n->a.get())), b(simp(n->b.get()));
        if (a.is_num(0)) return (-b).n_;
        if (a == b) return number(0).n_;
        return (a - b).n_;
      }
      case K::Mul: return (Expr(simp(n->a.get())) * Expr(simp(n->b.get()))).n_;
      case K::Div: {
        Expr a(simp(n->a.get())), b(simp(n->b.get()));
        if (a.is_num() && b.is_num() && b.num_value() != 0)
          return number(a.num_value() / b.num_value()).n_;
        return (a / b).n_;
      }
      case K::Pow: {
        Expr a(simp(n->a.get())), b(simp(n->b.get()));
        if (a.is_num() && b.is_num()) {
          double r = std::pow(a.num_value(), b.num_value());
          if (std::isfinite(r)) return number(r).n_;
        }
        return a.pow(b).n_;
      }
    }
    throw ExprError("corrupt expression in simplify");
  }

  static P clone(const Node* n) {
    auto m = std::make_shared<Node>(*n);
    return m;
  }

  static void vars(const Node* n, std::vector<std::string>& out) {
    switch (n->kind) {
      case K::Var:
        for (auto& v : out)
          if (v == n->var) return;
        out.push_back(n->var);
        return;
      case K::Num:
      case K::Pi: return;
      case K::Neg:
      case K::App: vars(n->a.get(), out); return;
      default:
        vars(n->a.get(), out);
        vars(n->b.get(), out);
    }
  }

  static int prec(K k) {
    switch (k) {
      case K::Add: case K::Sub: return 1;
      case K::Mul: case K::Div: return 2;
      case K::Neg: return 3;
      case K::Pow: return 4;
      default: return 5;
    }
  }

  static void print(const Node* n, std::ostream& os, int parent_prec) {
    int p = prec(n->kind);
    bool paren = p < parent_prec;
    if (paren) os << "(";
    switch (n->kind) {
      case K::Num: {
        std::ostringstream tmp;
        tmp.precision(17);
        tmp << n->num;
        os << tmp.str();
        break;
      }
      case K::Var: os << n->var; break;
      case K::Pi: os << "pi"; break;
      case K::Add: print(n->a.get(), os, p); os << " + "; print(n->b.get(), os, p); break;
      case K::Sub: print(n->a.get(), os, p); os << " - "; print(n->b.get(), os, p + 1); break;
      case K::Mul: print(n->a.get(), os, p); os << "*"; print(n->b.get(), os, p); break;
      case K::Div: print(n->a.get(), os, p); os << "/"; print(n->b.get(), os, p + 1); break;
      case K::Pow: print(n->a.get(), os, p + 1); os << "^"; print(n->b.get(), os, p); break;
      case K::Neg: os << "-"; print(n->a.get(), os, p); break;
      case K::App: os << fn_name(n->fn) << "("; print(n->a.get(), os, 0); os << ")"; break;
    }
    if (paren) os << ")";
  }

  friend class Parser;

 public:
  struct Compiled {
    enum class Op : std::uint8_t {
      push_num, push_var, add, sub, mul, div, pow, neg,
      sin, cos, tan, sinh, cosh, tanh, exp, log, sqrt
    };
    struct Ins { Op op; double num; int var; };
    std::vector<Ins> tape;
    int depth = 0;

    double eval(std::span<const double> vals) const {
      double stack[64];
      int sp = 0;
      for (auto& ins : tape) {
        switch (ins.op) {
          case Op::push_num: stack[sp++] = ins.num; break;
          case Op::push_var: stack[sp++] = vals[ins.var]; break;
          case Op::add: --sp; stack[sp - 1] += stack[sp]; break;
          case Op::sub: --sp; stack[sp - 1] -= stack[sp]; break;
          case Op::mul: --sp; stack[sp - 1] *= stack[sp]; break;
          case Op::div: {
            --sp;
            if (stack[sp] == 0) throw EvalError("division by zero");
            stack[sp - 1] /= stack[sp];
            break;
          }
          case Op::pow: {
            --sp;
            double r = std::pow(stack[sp - 1], stack[sp]);
            if (!std::isfinite(r)) throw EvalError("pow domain error");
            stack[sp - 1] = r;
            break;
          }
          case Op::neg: stack[sp - 1] = -stack[sp - 1]; break;
          case Op::sin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
          case Op::cos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
          case Op::tan: stack[sp - 1] = std::tan(stack[sp - 1]); break;
          case Op::sinh: stack[sp - 1] = std::sinh(stack[sp - 1]); break;
          case Op::cosh: stack[sp - 1] = std::cosh(stack[sp - 1]); break;
          case Op::tanh: stack[sp - 1] = std::tanh(stack[sp - 1]); break;
          case Op::exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
          case Op::log:
            if (stack[sp - 1] <= 0) throw EvalError("log of non-positive value");
            stack[sp - 1] = std::log(stack[sp - 1]);
            break;
          case Op::sqrt:
            if (stack[sp - 1] < 0) throw EvalError("sqrt of negative value");
            stack[sp - 1] = std::sqrt(stack[sp - 1]);
            break;
        }
      }
      return stack[0];
    }
  };

 private:
  static void emit(const Node* n, const std::vector<std::string>& order, Compiled& out) {
    using Op = Compiled::Op;
    switch (n->kind) {
      case K::Num: out.tape.push_back({Op::push_num, n->num, 0}); return;
      case K::Pi: out.tape.push_back({Op::push_num, M_PI, 0}); return;
      case K::Var: {
        for (size_t i = 0; i < order.size(); ++i)
          if (order[i] == n->var) {
            out.tape.push_back({Op::push_var, 0, static_cast<int>(i)});
            return;
          }
        throw EvalError("unbound variable: " + n->var);
      }
      case K::Add: emit(n->a.get(), order, out); emit(n->b.get(), order, out);
        out.tape.push_back({Op::add, 0, 0}); return;
      case K::Sub: emit(n->a.get(), order, out); emit(n->b.get(), order, out);
        out.tape.push_back({Op::sub, 0, 0}); return;
      case K::Mul: emit(n->a.get(), order, out); emit(n->b.get(), order, out);
        out.tape.push_back({Op::mul, 0, 0}); return;
      case K::Div: emit(n->a.get(), order, out); emit(n->b.get(), order, out);
        out.tape.push_back({Op::div, 0, 0}); return;
      case K::Pow: emit(n->a.get(), order, out); emit(n->b.get(), order, out);
        out.tape.push_back({Op::pow, 0, 0}); return;
      case K::Neg: emit(n->a.get(), order, out); out.tape.push_back({Op::neg, 0, 0}); return;
      case K::App: {
        emit(n->a.get(), order, out);
        Op op;
        switch (n->fn) {
          case Fn::sin: op = Op::sin; break;
          case Fn::cos: op = Op::cos; break;
          case Fn::tan: op = Op::tan; break;
          case Fn::sinh: op = Op::sinh; break;
          case Fn::cosh: op = Op::cosh; break;
          case Fn::tanh: op = Op::tanh; break;
          case Fn::exp: op = Op::exp; break;
          case Fn::log: op = Op::log; break;
          case Fn::sqrt: op = Op::sqrt; break;
          default: throw ExprError("unknown function in compile");
        }
        out.tape.push_back({op, 0, 0});
        return;
      }
    }
  }

 public:
  Compiled compile_impl(const std::vector<std::string>& order) const {
    Compiled out;
    emit(n_.get(), order, out);
    return out;
  }
};

inline Expr::Compiled Expr::compile(const std::vector<std::string>& varorder) const {
  return compile_impl(varorder);
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------
class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != s_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  const std::string& s_;
  size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  bool accept(char c) {
    if (peek(c)) { ++pos_; return true; }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept('+')) e = e + term();
      else if (accept('-')) e = e - term();
      else return e;
    }
  }
  Expr term() {
    Expr e = factor();
    for (;;) {
      if (accept('*')) e = e * factor();
      else if (accept('/')) e = e / factor();
      else return e;
    }
  }
  Expr factor() {
    if (accept('-')) return -factor();
    return power();
  }
  Expr power() {
    Expr base = atom();
    if (accept('^')) return base.pow(factor());
    return base;
  }
  Expr atom() {
    skip_ws();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident();
    throw ParseError("unexpected character", pos_);
  }
  Expr number() {
    size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_])))
        throw ParseError("malformed number", pos_);
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    return Expr::number(std::stod(s_.substr(start, pos_ - start)));
  }
  Expr ident() {
    size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    std::string name = s_.substr(start, pos_ - start);
    if (name == "pi") return Expr::pi();
    static const std::pair<const char*, Fn> fns[] = {
        {"sin", Fn::sin}, {"cos", Fn::cos}, {"tan", Fn::tan},
        {"sinh", Fn::sinh}, {"cosh", Fn::cosh}, {"tanh", Fn::tanh},
        {"exp", Fn::exp}, {"log", Fn::log}, {"sqrt", Fn::sqrt}};
    for (auto& [fname, f] : fns) {
      if (name == fname) {
        if (!peek('(')) throw ParseError("function '" + name + "' needs an argument", pos_);
        ++pos_;
        Expr arg = expr();
        expect(')');
        return Expr::apply(f, arg);
      }
    }
    if (peek('(')) throw ParseError("unknown function '" + name + "'", start);
    return Expr::var(name);
  }
};

inline Expr Expr::parse(const std::string& text) { return Parser(text).parse(); }

// Expr models the scalar-ring interface so Multivector<Expr> works as the
// coefficient algebra of form fields.  is_zero is syntactic (literal 0).
template <class R> struct ring;
template <>
struct ring<Expr> {
  static Expr zero() { return Expr::number(0); }
  static Expr one() { return Expr::number(1); }
  static bool is_zero(const Expr& e) { return e.is_num(0); }
  static constexpr bool exact = false;
};

}  // namespace superweyl
