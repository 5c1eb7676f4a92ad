#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace koopobs {

/// Node kinds of the expression tree.
enum class Op {
  Constant,
  Var,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Neg,
  Sin,
  Cos,
  Sqrt,
  Abs,
};

struct Node;

/// Immutable expression handle. Copies share the underlying tree, so an Expr
/// can be evaluated from any number of threads at once.
///
/// Constants are stored non-negative; a negative literal is represented as
/// Neg(Constant), which is exactly what the grammar produces for "-2".
class Expr {
 public:
  Expr();  // Constant 0

  static Expr constant(double value);
  static Expr var(std::size_t index);  // 1-based

  Op op() const;
  double value() const;           // Constant only
  std::size_t index() const;      // Var only
  int exponent() const;           // Pow only
  const Expr& lhs() const;        // unary child or left operand
  const Expr& rhs() const;        // right operand of a binary node

  /// Largest variable index referenced (0 if none).
  std::size_t max_var() const;

  /// Numeric value if the tree is a (possibly negated) constant.
  std::optional<double> as_constant() const;

  bool same_node(const Expr& other) const { return node_ == other.node_; }

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  friend Expr make_node(Node node);
  std::shared_ptr<const Node> node_;
};

struct Node {
  Op op = Op::Constant;
  double value = 0.0;
  std::size_t index = 0;
  int exponent = 0;
  std::vector<Expr> children;
  std::size_t max_var = 0;
};

// Smart constructors. They fold constants and drop additive zeros and
// multiplicative ones; nothing else is simplified.
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& base, int exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr sqrt(const Expr& a);
Expr abs(const Expr& a);

// Raw constructors: build exactly the requested node, no folding. The parser
// uses these so that parse(print(e)) reproduces e node for node.
namespace raw {
Expr binary(Op op, const Expr& a, const Expr& b);
Expr unary(Op op, const Expr& a);
Expr pow(const Expr& base, int exponent);
}  // namespace raw

using ExprVector = std::vector<Expr>;

/// A complex-valued function carried as a real and an imaginary part.
struct ComplexExpr {
  Expr re;
  std::optional<Expr> im;

  bool is_real() const { return !im.has_value(); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Raised on division by zero, sqrt of a negative number, or a non-finite
/// intermediate. `subtree()` is the printed form of the offending node.
class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& what, std::string subtree);
  const std::string& subtree() const { return subtree_; }

 private:
  std::string subtree_;
};

/// Thrown when a derived expression grows past the caller's node budget.
class ExpressionTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses `source` in a state space of dimension `n`.
Expr parse(std::string_view source, std::size_t n);

/// Minimal-parenthesis rendering that parses back to the same tree.
std::string to_string(const Expr& e);

double evaluate(const Expr& e, std::span<const double> x);
std::vector<double> evaluate(const ExprVector& v, std::span<const double> x);
std::complex<double> evaluate(const ComplexExpr& e, std::span<const double> x);

/// Exact partial derivative with respect to x_i (1-based).
Expr differentiate(const Expr& e, std::size_t i);

/// sum_i (de/dx_i) * f_i.
Expr lie_derivative(const Expr& h, const ExprVector& f);
ComplexExpr lie_derivative(const ComplexExpr& h, const ExprVector& f);

/// Replaces every Var(i) with Var(map[i-1]).
Expr substitute_vars(const Expr& e, std::span<const std::size_t> map);
ComplexExpr substitute_vars(const ComplexExpr& e,
                            std::span<const std::size_t> map);

bool structurally_equal(const Expr& a, const Expr& b);

/// Tree size, counting shared subtrees once per occurrence. Stops counting
/// once `cap` is exceeded.
std::size_t node_count(const Expr& e, std::size_t cap = SIZE_MAX);

}  // namespace koopobs
