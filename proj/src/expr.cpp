#include "koopobs/expr.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <sstream>

namespace koopobs {

Expr make_node(Node node);

namespace {

const std::shared_ptr<const Node>& zero_node() {
  static const auto node = std::make_shared<const Node>();
  return node;
}

const char* function_name(Op op) {
  switch (op) {
    case Op::Sin:
      return "sin";
    case Op::Cos:
      return "cos";
    case Op::Sqrt:
      return "sqrt";
    case Op::Abs:
      return "abs";
    default:
      return "?";
  }
}

bool is_const(const Expr& e, double v) {
  auto c = e.as_constant();
  return c && *c == v;
}

}  // namespace

Expr make_node(Node node) {
  for (const auto& c : node.children) {
    node.max_var = std::max(node.max_var, c.max_var());
  }
  if (node.op == Op::Var) node.max_var = node.index;
  return Expr(std::make_shared<const Node>(std::move(node)));
}

Expr::Expr() : node_(zero_node()) {}

Expr Expr::constant(double value) {
  assert(std::isfinite(value));
  if (value == 0.0) return Expr();
  if (value < 0.0) {
    Node n;
    n.op = Op::Constant;
    n.value = -value;
    return raw::unary(Op::Neg, make_node(std::move(n)));
  }
  Node n;
  n.op = Op::Constant;
  n.value = value;
  return make_node(std::move(n));
}

Expr Expr::var(std::size_t index) {
  assert(index >= 1);
  Node n;
  n.op = Op::Var;
  n.index = index;
  return make_node(std::move(n));
}

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
std::size_t Expr::index() const { return node_->index; }
int Expr::exponent() const { return node_->exponent; }
const Expr& Expr::lhs() const { return node_->children.at(0); }
const Expr& Expr::rhs() const { return node_->children.at(1); }
std::size_t Expr::max_var() const { return node_->max_var; }

std::optional<double> Expr::as_constant() const {
  if (node_->op == Op::Constant) return node_->value;
  if (node_->op == Op::Neg && lhs().op() == Op::Constant) return -lhs().value();
  return std::nullopt;
}

namespace raw {

Expr binary(Op op, const Expr& a, const Expr& b) {
  assert(is_binary(op));
  Node n;
  n.op = op;
  n.children = {a, b};
  return make_node(std::move(n));
}

Expr unary(Op op, const Expr& a) {
  assert(op == Op::Neg || is_function(op));
  Node n;
  n.op = op;
  n.children = {a};
  return make_node(std::move(n));
}

Expr pow(const Expr& base, int exponent) {
  Node n;
  n.op = Op::Pow;
  n.exponent = exponent;
  n.children = {base};
  return make_node(std::move(n));
}

}  // namespace raw

namespace {

double int_pow(double base, int k) {
  double result = 1.0;
  double b = base;
  unsigned m = k < 0 ? static_cast<unsigned>(-(k + 1)) + 1u : static_cast<unsigned>(k);
  while (m > 0) {
    if (m & 1u) result *= b;
    b *= b;
    m >>= 1u;
  }
  return k < 0 ? 1.0 / result : result;
}

}  // namespace

Expr operator+(const Expr& a, const Expr& b) {
  auto ca = a.as_constant();
  auto cb = b.as_constant();
  if (ca && cb) return Expr::constant(*ca + *cb);
  if (ca && *ca == 0.0) return b;
  if (cb && *cb == 0.0) return a;
  return raw::binary(Op::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  auto ca = a.as_constant();
  auto cb = b.as_constant();
  if (ca && cb) return Expr::constant(*ca - *cb);
  if (cb && *cb == 0.0) return a;
  if (ca && *ca == 0.0) return -b;
  return raw::binary(Op::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  auto ca = a.as_constant();
  auto cb = b.as_constant();
  if (ca && cb) return Expr::constant(*ca * *cb);
  if ((ca && *ca == 0.0) || (cb && *cb == 0.0)) return Expr();
  if (ca && *ca == 1.0) return b;
  if (cb && *cb == 1.0) return a;
  return raw::binary(Op::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  auto ca = a.as_constant();
  auto cb = b.as_constant();
  if (ca && cb && *cb != 0.0) return Expr::constant(*ca / *cb);
  if (ca && *ca == 0.0) return Expr();
  if (cb && *cb == 1.0) return a;
  return raw::binary(Op::Div, a, b);
}

Expr operator-(const Expr& a) {
  if (auto c = a.as_constant()) return Expr::constant(-*c);
  return raw::unary(Op::Neg, a);
}

Expr pow(const Expr& base, int exponent) {
  if (exponent == 0) return Expr::constant(1.0);
  if (exponent == 1) return base;
  if (auto c = base.as_constant()) {
    if (!(*c == 0.0 && exponent < 0)) {
      double v = int_pow(*c, exponent);
      if (std::isfinite(v)) return Expr::constant(v);
    }
  }
  return raw::pow(base, exponent);
}

Expr sin(const Expr& a) {
  if (auto c = a.as_constant()) return Expr::constant(std::sin(*c));
  return raw::unary(Op::Sin, a);
}

Expr cos(const Expr& a) {
  if (auto c = a.as_constant()) return Expr::constant(std::cos(*c));
  return raw::unary(Op::Cos, a);
}

Expr sqrt(const Expr& a) {
  if (auto c = a.as_constant(); c && *c >= 0.0) return Expr::constant(std::sqrt(*c));
  return raw::unary(Op::Sqrt, a);
}

Expr abs(const Expr& a) {
  if (auto c = a.as_constant()) return Expr::constant(std::fabs(*c));
  return raw::unary(Op::Abs, a);
}

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error(what + " at line " + std::to_string(line) + ", column " +
                         std::to_string(column)),
      line_(line),
      column_(column) {}

EvalError::EvalError(const std::string& what, std::string subtree)
    : std::runtime_error(what + " in '" + subtree + "'"), subtree_(std::move(subtree)) {}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  Parser(std::string_view src, std::size_t n) : src_(src), n_(n) {}

  Expr run() {
    Expr e = expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { fail_at(msg, pos_); }

  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < at && i < src_.size(); ++i) {
      if (src_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(msg, line, col);
  }

  void skip_ws() {
    while (pos_ < src_.size() &&
           (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= src_.size()) fail(std::string("expected '") + c + "' but input ended");
      fail(std::string("expected '") + c + "'");
    }
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = raw::binary(Op::Add, lhs, term());
      } else if (accept('-')) {
        lhs = raw::binary(Op::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = factor();
    for (;;) {
      if (accept('*')) {
        lhs = raw::binary(Op::Mul, lhs, factor());
      } else if (accept('/')) {
        lhs = raw::binary(Op::Div, lhs, factor());
      } else {
        return lhs;
      }
    }
  }

  Expr factor() {
    if (accept('-')) return raw::unary(Op::Neg, factor());
    Expr base = atom();
    if (accept('^')) {
      skip_ws();
      bool negative = false;
      if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
        negative = src_[pos_] == '-';
        ++pos_;
      }
      std::size_t start = pos_;
      long long k = read_integer("exponent");
      if (k > 1000) fail_at("exponent too large", start);
      return raw::pow(base, static_cast<int>(negative ? -k : k));
    }
    return base;
  }

  long long read_integer(const char* what) {
    std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (start == pos_) fail(std::string("expected integer ") + what);
    long long v = 0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc()) fail_at(std::string("integer ") + what + " out of range", start);
    return v;
  }

  Expr atom() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '(') {
      ++pos_;
      Expr inner = expr();
      expect(')');
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      std::string_view word = src_.substr(start, pos_ - start);
      if (word == "x") {
        long long idx = read_integer("variable index");
        if (idx < 1 || static_cast<std::size_t>(idx) > n_) {
          fail_at("variable x" + std::to_string(idx) + " out of range (n = " + std::to_string(n_) +
                      ")",
                  start);
        }
        return Expr::var(static_cast<std::size_t>(idx));
      }
      Op op;
      if (word == "sin") {
        op = Op::Sin;
      } else if (word == "cos") {
        op = Op::Cos;
      } else if (word == "sqrt") {
        op = Op::Sqrt;
      } else if (word == "abs") {
        op = Op::Abs;
      } else {
        fail_at("unknown identifier '" + std::string(word) + "'", start);
      }
      expect('(');
      Expr arg = expr();
      expect(')');
      return raw::unary(op, arg);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr number() {
    std::size_t start = pos_;
    auto digits = [&] {
      std::size_t s = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      return pos_ - s;
    };
    std::size_t count = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      count += digits();
    }
    if (count == 0) fail_at("malformed number", start);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail_at("malformed exponent", start);
    }
    double v = 0.0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_ || !std::isfinite(v))
      fail_at("malformed number", start);
    Node node;
    node.op = Op::Constant;
    node.value = v;
    return make_node(std::move(node));
  }

  std::string_view src_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view source, std::size_t n) { return Parser(source, n).run(); }

// ---------------------------------------------------------------------------
// Printer

namespace {

int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Add:
    case Op::Sub:
      return 1;
    case Op::Mul:
    case Op::Div:
      return 2;
    case Op::Neg:
      return 3;
    case Op::Pow:
      return 4;
    default:
      return 5;
  }
}

void print(const Expr& e, int min_prec, std::string& out);

void print_raw(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Constant: {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof buf, e.value());
      out.append(buf, res.ptr);
      break;
    }
    case Op::Var:
      out += 'x';
      out += std::to_string(e.index());
      break;
    case Op::Add:
    case Op::Sub:
      print(e.lhs(), 1, out);
      out += e.op() == Op::Add ? " + " : " - ";
      print(e.rhs(), 2, out);
      break;
    case Op::Mul:
    case Op::Div:
      print(e.lhs(), 2, out);
      out += e.op() == Op::Mul ? '*' : '/';
      print(e.rhs(), 3, out);
      break;
    case Op::Neg:
      out += '-';
      print(e.lhs(), 3, out);
      break;
    case Op::Pow:
      print(e.lhs(), 5, out);
      out += '^';
      out += std::to_string(e.exponent());
      break;
    case Op::Sin:
    case Op::Cos:
    case Op::Sqrt:
    case Op::Abs:
      out += function_name(e.op());
      out += '(';
      print(e.lhs(), 0, out);
      out += ')';
      break;
  }
}

void print(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    print_raw(e, out);
    out += ')';
  } else {
    print_raw(e, out);
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

double evaluate(const Expr& e, std::span<const double> x) {
  switch (e.op()) {
    case Op::Constant:
      return e.value();
    case Op::Var:
      if (e.index() > x.size()) throw EvalError("point has too few coordinates", to_string(e));
      return x[e.index() - 1];
    case Op::Add:
      return evaluate(e.lhs(), x) + evaluate(e.rhs(), x);
    case Op::Sub:
      return evaluate(e.lhs(), x) - evaluate(e.rhs(), x);
    case Op::Mul:
      return evaluate(e.lhs(), x) * evaluate(e.rhs(), x);
    case Op::Div: {
      double num = evaluate(e.lhs(), x);
      double den = evaluate(e.rhs(), x);
      if (den == 0.0) throw EvalError("division by zero", to_string(e));
      return num / den;
    }
    case Op::Pow: {
      double b = evaluate(e.lhs(), x);
      if (b == 0.0 && e.exponent() < 0) throw EvalError("division by zero", to_string(e));
      return int_pow(b, e.exponent());
    }
    case Op::Neg:
      return -evaluate(e.lhs(), x);
    case Op::Sin:
      return std::sin(evaluate(e.lhs(), x));
    case Op::Cos:
      return std::cos(evaluate(e.lhs(), x));
    case Op::Sqrt: {
      double a = evaluate(e.lhs(), x);
      if (a < 0.0) throw EvalError("sqrt of negative value", to_string(e));
      return std::sqrt(a);
    }
    case Op::Abs:
      return std::fabs(evaluate(e.lhs(), x));
  }
  return 0.0;
}

std::vector<double> evaluate(const ExprVector& v, std::span<const double> x) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(evaluate(e, x));
  return out;
}

std::complex<double> evaluate(const ComplexExpr& e, std::span<const double> x) {
  return {evaluate(e.re, x), e.im ? evaluate(*e.im, x) : 0.0};
}

// ---------------------------------------------------------------------------
// Differentiation

Expr differentiate(const Expr& e, std::size_t i) {
  if (e.max_var() < i) return Expr();
  switch (e.op()) {
    case Op::Constant:
      return Expr();
    case Op::Var:
      return Expr::constant(e.index() == i ? 1.0 : 0.0);
    case Op::Add:
      return differentiate(e.lhs(), i) + differentiate(e.rhs(), i);
    case Op::Sub:
      return differentiate(e.lhs(), i) - differentiate(e.rhs(), i);
    case Op::Mul:
      return differentiate(e.lhs(), i) * e.rhs() + e.lhs() * differentiate(e.rhs(), i);
    case Op::Div: {
      const Expr& u = e.lhs();
      const Expr& v = e.rhs();
      Expr du = differentiate(u, i);
      Expr dv = differentiate(v, i);
      if (is_const(dv, 0.0)) return du / v;
      return (du * v - u * dv) / pow(v, 2);
    }
    case Op::Pow: {
      int k = e.exponent();
      return Expr::constant(k) * pow(e.lhs(), k - 1) * differentiate(e.lhs(), i);
    }
    case Op::Neg:
      return -differentiate(e.lhs(), i);
    case Op::Sin:
      return cos(e.lhs()) * differentiate(e.lhs(), i);
    case Op::Cos:
      return -(sin(e.lhs()) * differentiate(e.lhs(), i));
    case Op::Sqrt:
      return differentiate(e.lhs(), i) / (Expr::constant(2.0) * sqrt(e.lhs()));
    case Op::Abs:
      // sign(u) as u/|u|; faults only when evaluated at u = 0.
      return (e.lhs() / abs(e.lhs())) * differentiate(e.lhs(), i);
  }
  return Expr();
}

Expr lie_derivative(const Expr& h, const ExprVector& f) {
  if (h.max_var() > f.size()) {
    throw std::invalid_argument("lie_derivative: expression uses x" + std::to_string(h.max_var()) +
                                " but the vector field has dimension " + std::to_string(f.size()));
  }
  Expr sum;
  for (std::size_t i = 1; i <= f.size(); ++i) {
    Expr d = differentiate(h, i);
    if (is_const(d, 0.0)) continue;
    sum = sum + d * f[i - 1];
  }
  return sum;
}

ComplexExpr lie_derivative(const ComplexExpr& h, const ExprVector& f) {
  ComplexExpr out{lie_derivative(h.re, f), std::nullopt};
  if (h.im) out.im = lie_derivative(*h.im, f);
  return out;
}

Expr substitute_vars(const Expr& e, std::span<const std::size_t> map) {
  switch (e.op()) {
    case Op::Constant:
      return e;
    case Op::Var:
      if (e.index() > map.size()) throw std::invalid_argument("substitute_vars: map too short");
      return Expr::var(map[e.index() - 1]);
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
      return raw::binary(e.op(), substitute_vars(e.lhs(), map), substitute_vars(e.rhs(), map));
    case Op::Pow:
      return raw::pow(substitute_vars(e.lhs(), map), e.exponent());
    default:
      return raw::unary(e.op(), substitute_vars(e.lhs(), map));
  }
}

ComplexExpr substitute_vars(const ComplexExpr& e, std::span<const std::size_t> map) {
  ComplexExpr out{substitute_vars(e.re, map), std::nullopt};
  if (e.im) out.im = substitute_vars(*e.im, map);
  return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.same_node(b)) return true;
  if (a.op() != b.op()) return false;
  switch (a.op()) {
    case Op::Constant:
      return a.value() == b.value();
    case Op::Var:
      return a.index() == b.index();
    case Op::Pow:
      return a.exponent() == b.exponent() && structurally_equal(a.lhs(), b.lhs());
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
      return structurally_equal(a.lhs(), b.lhs()) && structurally_equal(a.rhs(), b.rhs());
    default:
      return structurally_equal(a.lhs(), b.lhs());
  }
}

namespace {

void count_nodes(const Expr& e, std::size_t cap, std::size_t& total) {
  if (total > cap) return;
  ++total;
  switch (e.op()) {
    case Op::Constant:
    case Op::Var:
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
      count_nodes(e.lhs(), cap, total);
      count_nodes(e.rhs(), cap, total);
      return;
    default:
      count_nodes(e.lhs(), cap, total);
  }
}

}  // namespace

std::size_t node_count(const Expr& e, std::size_t cap) {
  std::size_t total = 0;
  count_nodes(e, cap, total);
  return total;
}

}  // namespace koopobs
