#include "expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "error.hpp"

namespace szaszlab::expr {

namespace {

using Kind = Node::Kind;

NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Const;
  n->value = v;
  return n;
}

NodePtr variable(int idx) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Var;
  n->var = idx;
  return n;
}

bool is_const(const NodePtr& n, double v) {
  return n->kind == Kind::Const && n->value == v;
}

// Constant-folding constructors keep derivative trees from exploding.
NodePtr add(NodePtr a, NodePtr b) {
  if (is_const(a, 0)) return b;
  if (is_const(b, 0)) return a;
  if (a->kind == Kind::Const && b->kind == Kind::Const) return constant(a->value + b->value);
  return make(Kind::Add, std::move(a), std::move(b));
}

NodePtr sub(NodePtr a, NodePtr b) {
  if (is_const(b, 0)) return a;
  if (a->kind == Kind::Const && b->kind == Kind::Const) return constant(a->value - b->value);
  if (is_const(a, 0)) return make(Kind::Neg, std::move(b));
  return make(Kind::Sub, std::move(a), std::move(b));
}

NodePtr mul(NodePtr a, NodePtr b) {
  if (is_const(a, 0) || is_const(b, 0)) return constant(0);
  if (is_const(a, 1)) return b;
  if (is_const(b, 1)) return a;
  if (a->kind == Kind::Const && b->kind == Kind::Const) return constant(a->value * b->value);
  return make(Kind::Mul, std::move(a), std::move(b));
}

NodePtr div(NodePtr a, NodePtr b) {
  if (is_const(a, 0)) return constant(0);
  if (is_const(b, 1)) return a;
  if (a->kind == Kind::Const && b->kind == Kind::Const && b->value != 0)
    return constant(a->value / b->value);
  return make(Kind::Div, std::move(a), std::move(b));
}

NodePtr pow_node(NodePtr a, NodePtr b) {
  if (is_const(b, 0)) return constant(1);
  if (is_const(b, 1)) return a;
  if (a->kind == Kind::Const && b->kind == Kind::Const)
    return constant(std::pow(a->value, b->value));
  return make(Kind::Pow, std::move(a), std::move(b));
}

class Parser {
public:
  Parser(const std::string& text, const std::vector<std::string>& vars)
      : text_(text), vars_(vars) {}

  NodePtr run() {
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size())
      fail(ErrorKind::Usage, "unexpected trailing input in expression at position " +
                                 std::to_string(pos_) + ": '" + text_.substr(pos_) + "'");
    return e;
  }

private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char c) {
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

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (consume('+')) lhs = add(lhs, parse_term());
      else if (consume('-')) lhs = sub(lhs, parse_term());
      else return lhs;
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (consume('*')) lhs = mul(lhs, parse_unary());
      else if (consume('/')) lhs = div(lhs, parse_unary());
      else return lhs;
    }
  }

  NodePtr parse_unary() {
    if (consume('-')) {
      NodePtr inner = parse_unary();
      if (inner->kind == Kind::Const) return constant(-inner->value);
      return make(Kind::Neg, inner);
    }
    if (consume('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_atom();
    if (consume('^')) return pow_node(base, parse_unary());
    return base;
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail(ErrorKind::Usage, "unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!consume(')')) fail(ErrorKind::Usage, "missing ')' in expression");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    fail(ErrorKind::Usage, std::string("unexpected character '") + c + "' in expression");
  }

  NodePtr parse_number() {
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail(ErrorKind::Usage, "malformed number in expression");
    pos_ += static_cast<std::size_t>(end - begin);
    return constant(v);
  }

  NodePtr parse_name() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name = text_.substr(start, pos_ - start);
    if (name == "exp" || name == "log") {
      if (!consume('(')) fail(ErrorKind::Usage, name + " requires parentheses");
      NodePtr arg = parse_expr();
      if (!consume(')')) fail(ErrorKind::Usage, "missing ')' after " + name);
      if (arg->kind == Kind::Const)
        return constant(name == "exp" ? std::exp(arg->value) : std::log(arg->value));
      return make(name == "exp" ? Kind::Exp : Kind::Log, arg);
    }
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i] == name) return variable(static_cast<int>(i));
    fail(ErrorKind::Usage, "unknown identifier '" + name + "' in expression");
  }

  const std::string& text_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

double eval_node(const Node* n, std::span<const double> args) {
  switch (n->kind) {
    case Kind::Const: return n->value;
    case Kind::Var: return args[static_cast<std::size_t>(n->var)];
    case Kind::Add: return eval_node(n->a.get(), args) + eval_node(n->b.get(), args);
    case Kind::Sub: return eval_node(n->a.get(), args) - eval_node(n->b.get(), args);
    case Kind::Mul: return eval_node(n->a.get(), args) * eval_node(n->b.get(), args);
    case Kind::Div: return eval_node(n->a.get(), args) / eval_node(n->b.get(), args);
    case Kind::Neg: return -eval_node(n->a.get(), args);
    case Kind::Exp: return std::exp(eval_node(n->a.get(), args));
    case Kind::Log: {
      const double v = eval_node(n->a.get(), args);
      if (v <= 0.0)
        fail(ErrorKind::Domain, "log of non-positive value in expression");
      return std::log(v);
    }
    case Kind::Pow: {
      const double base = eval_node(n->a.get(), args);
      const double e = eval_node(n->b.get(), args);
      return std::pow(base, e);
    }
  }
  return 0.0;
}

NodePtr diff_node(const NodePtr& n, int var) {
  switch (n->kind) {
    case Kind::Const: return constant(0);
    case Kind::Var: return constant(n->var == var ? 1 : 0);
    case Kind::Add: return add(diff_node(n->a, var), diff_node(n->b, var));
    case Kind::Sub: return sub(diff_node(n->a, var), diff_node(n->b, var));
    case Kind::Neg: return make(Kind::Neg, diff_node(n->a, var));
    case Kind::Mul:
      return add(mul(diff_node(n->a, var), n->b), mul(n->a, diff_node(n->b, var)));
    case Kind::Div:
      return div(sub(mul(diff_node(n->a, var), n->b), mul(n->a, diff_node(n->b, var))),
                 mul(n->b, n->b));
    case Kind::Exp: return mul(diff_node(n->a, var), n);
    case Kind::Log: return div(diff_node(n->a, var), n->a);
    case Kind::Pow: {
      if (n->b->kind == Kind::Const) {
        const double c = n->b->value;
        return mul(mul(constant(c), pow_node(n->a, constant(c - 1))), diff_node(n->a, var));
      }
      // u^v = exp(v log u)
      NodePtr rewritten = make(Kind::Exp, mul(n->b, make(Kind::Log, n->a)));
      return diff_node(rewritten, var);
    }
  }
  return constant(0);
}

void str_node(const Node* n, std::ostringstream& os) {
  switch (n->kind) {
    case Kind::Const: os << n->value; return;
    case Kind::Var: os << "x" << n->var; return;
    case Kind::Add: os << "("; str_node(n->a.get(), os); os << " + "; str_node(n->b.get(), os); os << ")"; return;
    case Kind::Sub: os << "("; str_node(n->a.get(), os); os << " - "; str_node(n->b.get(), os); os << ")"; return;
    case Kind::Mul: os << "("; str_node(n->a.get(), os); os << " * "; str_node(n->b.get(), os); os << ")"; return;
    case Kind::Div: os << "("; str_node(n->a.get(), os); os << " / "; str_node(n->b.get(), os); os << ")"; return;
    case Kind::Neg: os << "(-"; str_node(n->a.get(), os); os << ")"; return;
    case Kind::Exp: os << "exp("; str_node(n->a.get(), os); os << ")"; return;
    case Kind::Log: os << "log("; str_node(n->a.get(), os); os << ")"; return;
    case Kind::Pow: os << "("; str_node(n->a.get(), os); os << "^"; str_node(n->b.get(), os); os << ")"; return;
  }
}

} // namespace

Expression Expression::parse(const std::string& text, const std::vector<std::string>& variables) {
  Parser p(text, variables);
  return Expression(p.run(), static_cast<int>(variables.size()));
}

double Expression::eval(std::span<const double> args) const {
  if (!root_) fail(ErrorKind::Usage, "evaluating empty expression");
  if (static_cast<int>(args.size()) != arity_)
    fail(ErrorKind::Usage, "expression arity mismatch");
  return eval_node(root_.get(), args);
}

Expression Expression::derivative(int var) const {
  if (!root_) fail(ErrorKind::Usage, "differentiating empty expression");
  return Expression(diff_node(root_, var), arity_);
}

std::string Expression::str() const {
  if (!root_) return "<empty>";
  std::ostringstream os;
  str_node(root_.get(), os);
  return os.str();
}

} // namespace szaszlab::expr
