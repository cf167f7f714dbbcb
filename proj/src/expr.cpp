#include "hypcon/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <vector>

namespace hypcon {

const char* var_name(Var var) {
  switch (var) {
    case Var::x: return "x";
    case Var::u: return "u";
    case Var::v: return "v";
    case Var::t: return "t";
  }
  return "?";
}

namespace {

using Op = Expr::Op;
using NodePtr = Expr::NodePtr;

const char* op_name(Op op) {
  switch (op) {
    case Op::abs: return "abs";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sign: return "sign";
    case Op::min: return "min";
    case Op::max: return "max";
    case Op::pow: return "pow";
    default: return "";
  }
}

double sign_of(double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); }

bool pow_domain_ok(double a, double b) {
  if (a == 0.0 && b < 0.0) return false;
  if (a < 0.0 && b != std::trunc(b)) return false;
  return true;
}

double apply_unary(Op op, double a) {
  switch (op) {
    case Op::neg: return -a;
    case Op::abs: return std::fabs(a);
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::exp: return std::exp(a);
    case Op::log:
      if (!(a > 0.0)) throw EvalError("log of non-positive value");
      return std::log(a);
    case Op::sign: return sign_of(a);
    default: break;
  }
  throw EvalError("bad unary operator");
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div:
      if (b == 0.0) throw EvalError("division by zero");
      return a / b;
    case Op::min: return a <= b ? a : b;
    case Op::max: return a >= b ? a : b;
    case Op::pow:
      if (!pow_domain_ok(a, b)) throw EvalError("pow outside its domain");
      return std::pow(a, b);
    default: break;
  }
  throw EvalError("bad binary operator");
}

double eval_node(const Expr::Node& n, double x, double u, double v, double t) {
  switch (n.op) {
    case Op::constant: return n.value;
    case Op::variable:
      switch (n.var) {
        case Var::x: return x;
        case Var::u: return u;
        case Var::v: return v;
        case Var::t: return t;
      }
      return 0.0;
    case Op::neg: case Op::abs: case Op::sin: case Op::cos:
    case Op::exp: case Op::log: case Op::sign:
      return apply_unary(n.op, eval_node(*n.a, x, u, v, t));
    default:
      return apply_binary(n.op, eval_node(*n.a, x, u, v, t), eval_node(*n.b, x, u, v, t));
  }
}

bool node_depends(const Expr::Node& n, Var var) {
  if (n.op == Op::constant) return false;
  if (n.op == Op::variable) return n.var == var;
  if (node_depends(*n.a, var)) return true;
  return n.b && node_depends(*n.b, var);
}

std::size_t count_nodes(const Expr::Node& n) {
  std::size_t c = 1;
  if (n.a) c += count_nodes(*n.a);
  if (n.b) c += count_nodes(*n.b);
  return c;
}

std::string format_number(double c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", std::fabs(c));
  if (std::signbit(c)) return std::string("(-") + buf + ")";
  return buf;
}

void print_node(const Expr::Node& n, std::string& out) {
  switch (n.op) {
    case Op::constant: out += format_number(n.value); return;
    case Op::variable: out += var_name(n.var); return;
    case Op::neg:
      out += "-(";
      print_node(*n.a, out);
      out += ")";
      return;
    case Op::abs: case Op::sin: case Op::cos: case Op::exp: case Op::log: case Op::sign:
      out += op_name(n.op);
      out += "(";
      print_node(*n.a, out);
      out += ")";
      return;
    case Op::min: case Op::max: case Op::pow:
      out += op_name(n.op);
      out += "(";
      print_node(*n.a, out);
      out += ",";
      print_node(*n.b, out);
      out += ")";
      return;
    default: {
      const char sym = n.op == Op::add ? '+' : n.op == Op::sub ? '-' : n.op == Op::mul ? '*' : '/';
      out += "(";
      print_node(*n.a, out);
      out += sym;
      print_node(*n.b, out);
      out += ")";
      return;
    }
  }
}

bool is_const(const Expr& e, double c) { return e.is_constant() && e.constant_value() == c; }

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}

Expr Expr::constant(double c) {
  return Expr(std::make_shared<const Node>(Node{Op::constant, Var::x, c, nullptr, nullptr}));
}

Expr Expr::variable(Var var) {
  return Expr(std::make_shared<const Node>(Node{Op::variable, var, 0.0, nullptr, nullptr}));
}

// Light folding keeps derivative trees small. Folding never changes the
// value of a well-defined evaluation; domain errors are left for runtime.
Expr Expr::unary(Op op, const Expr& a) {
  if (a.is_constant()) {
    const double c = a.constant_value();
    if (op != Op::log || c > 0.0) {
      const double r = apply_unary(op, c);
      if (std::isfinite(r)) return constant(r);
    }
  }
  if (op == Op::neg && a.root_->op == Op::neg) return Expr(a.root_->a);
  return Expr(std::make_shared<const Node>(Node{op, Var::x, 0.0, a.root_, nullptr}));
}

Expr Expr::binary(Op op, const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) {
    const double ca = a.constant_value();
    const double cb = b.constant_value();
    const bool defined = !(op == Op::div && cb == 0.0) && !(op == Op::pow && !pow_domain_ok(ca, cb));
    if (defined) {
      const double r = apply_binary(op, ca, cb);
      if (std::isfinite(r)) return constant(r);
    }
  }
  switch (op) {
    case Op::add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Op::sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return unary(Op::neg, b);
      break;
    case Op::mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Op::div:
      if (is_const(b, 1.0)) return a;
      break;
    case Op::pow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return constant(1.0);
      break;
    default: break;
  }
  return Expr(std::make_shared<const Node>(Node{op, Var::x, 0.0, a.root_, b.root_}));
}

double Expr::eval(double x, double u, double v, double t) const { return eval_node(*root_, x, u, v, t); }

bool Expr::depends_on(Var var) const { return node_depends(*root_, var); }

std::size_t Expr::node_count() const { return count_nodes(*root_); }

std::string Expr::str() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr run() {
    skip_space();
    if (pos_ >= src_.size()) throw ParseError(pos_, "empty expression");
    Expr e = parse_expr();
    skip_space();
    if (pos_ < src_.size()) throw ParseError(pos_, std::string("unexpected '") + src_[pos_] + "'");
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    skip_space();
    if (pos_ >= src_.size()) throw ParseError(pos_, std::string("expected '") + c + "' before end of input");
    if (src_[pos_] != c) throw ParseError(pos_, std::string("expected '") + c + "', found '" + src_[pos_] + "'");
    ++pos_;
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (accept('+')) lhs = Expr::binary(Op::add, lhs, parse_term());
      else if (accept('-')) lhs = Expr::binary(Op::sub, lhs, parse_term());
      else return lhs;
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) lhs = Expr::binary(Op::mul, lhs, parse_unary());
      else if (accept('/')) lhs = Expr::binary(Op::div, lhs, parse_unary());
      else return lhs;
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::unary(Op::neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_primary();
  }

  Expr parse_primary() {
    skip_space();
    if (pos_ >= src_.size()) throw ParseError(pos_, "unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      expect(')');
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(pos_, std::string("unexpected '") + c + "'");
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p;
        pos_ = p;
      }
    }
    double value = 0.0;
    const char* first = src_.data() + start;
    const char* last = src_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ParseError(start, "malformed number");
    return Expr::constant(value);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);
    if (name == "x") return Expr::variable(Var::x);
    if (name == "u") return Expr::variable(Var::u);
    if (name == "v") return Expr::variable(Var::v);
    if (name == "t") return Expr::variable(Var::t);

    struct Fn { std::string_view name; Op op; int arity; };
    static constexpr Fn table[] = {
        {"abs", Op::abs, 1}, {"sin", Op::sin, 1}, {"cos", Op::cos, 1}, {"exp", Op::exp, 1},
        {"log", Op::log, 1}, {"sign", Op::sign, 1}, {"min", Op::min, 2}, {"max", Op::max, 2},
        {"pow", Op::pow, 2},
    };
    for (const Fn& fn : table) {
      if (fn.name != name) continue;
      skip_space();
      if (pos_ >= src_.size() || src_[pos_] != '(')
        throw ParseError(pos_, "expected '(' after " + std::string(name));
      ++pos_;
      Expr a = parse_expr();
      if (fn.arity == 1) {
        expect(')');
        return Expr::unary(fn.op, a);
      }
      skip_space();
      if (pos_ < src_.size() && src_[pos_] == ')')
        throw ParseError(pos_, std::string(name) + " takes two arguments");
      expect(',');
      Expr b = parse_expr();
      expect(')');
      return Expr::binary(fn.op, a, b);
    }
    throw ParseError(start, "unknown identifier '" + std::string(name) + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

Expr wrap(const NodePtr& n);

Expr diff_node(const NodePtr& n, Var var) {
  const Expr zero = Expr::constant(0.0);
  const Expr one = Expr::constant(1.0);
  switch (n->op) {
    case Op::constant: return zero;
    case Op::variable: return n->var == var ? one : zero;
    default: break;
  }
  const Expr a = wrap(n->a);
  const Expr da = diff_node(n->a, var);
  switch (n->op) {
    case Op::neg: return -da;
    case Op::abs: return Expr::unary(Op::sign, a) * da;
    case Op::sign: return zero;
    case Op::sin: return Expr::unary(Op::cos, a) * da;
    case Op::cos: return -(Expr::unary(Op::sin, a) * da);
    case Op::exp: return wrap(n) * da;
    case Op::log: return da / a;
    default: break;
  }
  const Expr b = wrap(n->b);
  const Expr db = diff_node(n->b, var);
  switch (n->op) {
    case Op::add: return da + db;
    case Op::sub: return da - db;
    case Op::mul: return da * b + a * db;
    case Op::div: return da / b - (a * db) / (b * b);
    case Op::min:
    case Op::max: {
      if (da.is_constant() && db.is_constant() && da.constant_value() == db.constant_value()) return da;
      // h = 1 exactly when the first argument is active (ties included), else 0.
      const Expr gap = n->op == Op::min ? b - a : a - b;
      const Expr h = Expr::unary(Op::sign, one + Expr::unary(Op::sign, gap));
      return h * da + (one - h) * db;
    }
    case Op::pow: {
      if (b.is_constant()) {
        return b * Expr::binary(Op::pow, a, Expr::constant(b.constant_value() - 1.0)) * da;
      }
      return wrap(n) * (db * Expr::unary(Op::log, a) + b * da / a);
    }
    default: break;
  }
  throw EvalError("cannot differentiate node");
}

}  // namespace

namespace {
Expr wrap(const NodePtr& n) { return Expr::from_node(n); }
}  // namespace

Expr parse(std::string_view source) { return Parser(source).run(); }

Expr differentiate(const Expr& e, Var var) {
  return diff_node(e.node(), var);
}

}  // namespace hypcon
