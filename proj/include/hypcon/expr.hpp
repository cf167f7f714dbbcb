#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "hypcon/errors.hpp"

namespace hypcon {

enum class Var : unsigned char { x, u, v, t };

const char* var_name(Var var);

// Immutable expression tree over the four variables x, u, v, t.
// Copies share structure, so passing by value is cheap and thread safe.
class Expr {
 public:
  enum class Op : unsigned char {
    constant, variable,
    neg, abs, sin, cos, exp, log, sign,
    add, sub, mul, div, min, max, pow,
  };

  struct Node {
    Op op;
    Var var;
    double value;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
  };
  using NodePtr = std::shared_ptr<const Node>;

  Expr();  // the constant 0

  static Expr constant(double c);
  static Expr variable(Var var);
  static Expr unary(Op op, const Expr& a);
  static Expr binary(Op op, const Expr& a, const Expr& b);

  double eval(double x, double u, double v, double t) const;
  double operator()(double x, double u, double v, double t) const { return eval(x, u, v, t); }

  bool depends_on(Var var) const;
  bool is_constant() const { return root_->op == Op::constant; }
  double constant_value() const { return root_->value; }

  // Fully parenthesised text that parses back to the same tree.
  std::string str() const;

  const Node& root() const { return *root_; }
  const NodePtr& node() const { return root_; }
  static Expr from_node(NodePtr node) { return Expr(std::move(node)); }
  std::size_t node_count() const;

  friend Expr operator+(const Expr& a, const Expr& b) { return binary(Op::add, a, b); }
  friend Expr operator-(const Expr& a, const Expr& b) { return binary(Op::sub, a, b); }
  friend Expr operator*(const Expr& a, const Expr& b) { return binary(Op::mul, a, b); }
  friend Expr operator/(const Expr& a, const Expr& b) { return binary(Op::div, a, b); }
  friend Expr operator-(const Expr& a) { return unary(Op::neg, a); }

 private:
  explicit Expr(NodePtr root) : root_(std::move(root)) {}
  NodePtr root_;
};

// Grammar (precedence low to high):
//   expr  := term (('+'|'-') term)*
//   term  := unary (('*'|'/') unary)*
//   unary := ('-'|'+') unary | primary
//   primary := number | x | u | v | t | func '(' args ')' | '(' expr ')'
// Throws ParseError carrying the byte offset of the problem.
Expr parse(std::string_view source);

// Exact partial derivative. abs' = sign, sign' = 0, and min/max follow the
// branch that is active, with ties resolved in favour of the first argument.
Expr differentiate(const Expr& e, Var var);

}  // namespace hypcon
