#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace szaszlab::expr {

// Small arithmetic grammar used for Kahler potentials and test functions:
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('+' | '-') unary | power
//   power  := atom ('^' unary)?            right associative
//   atom   := number | variable | '(' expr ')' | ('exp' | 'log') '(' expr ')'
//
// Variable names are supplied by the caller; parsing is case sensitive.
struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Log };
  Kind kind;
  double value = 0.0; // Const
  int var = -1;       // Var
  NodePtr a, b;
};

class Expression {
public:
  Expression() = default;

  static Expression parse(const std::string& text, const std::vector<std::string>& variables);

  double eval(std::span<const double> args) const;
  Expression derivative(int var) const;
  int arity() const { return arity_; }
  bool empty() const { return !root_; }
  std::string str() const;

private:
  Expression(NodePtr root, int arity) : root_(std::move(root)), arity_(arity) {}
  NodePtr root_;
  int arity_ = 0;
};

} // namespace szaszlab::expr
