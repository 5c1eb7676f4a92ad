#include <cmath>
#include <vector>

#include "doctest.h"
#include "koopobs/expr.hpp"
#include "koopobs/models.hpp"
#include "random_expr.hpp"

using namespace koopobs;

namespace {

double at(const std::string& src, std::vector<double> x) {
  return evaluate(parse(src, x.size()), x);
}

}  // namespace

TEST_CASE("parse single variable") {
  Expr e = parse("x1", 3);
  CHECK(e.op() == Op::Var);
  CHECK(e.index() == 1);
}

TEST_CASE("parse keeps the printed tree shape") {
  Expr e = parse("x1^2 + x2^2 + x3", 3);
  Expr expected = raw::binary(
      Op::Add, raw::binary(Op::Add, raw::pow(Expr::var(1), 2), raw::pow(Expr::var(2), 2)),
      Expr::var(3));
  CHECK(structurally_equal(e, expected));
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse("x5", 3), ParseError);
  CHECK_THROWS_AS(parse("x0", 3), ParseError);
  CHECK_THROWS_AS(parse("x1 +", 3), ParseError);
  CHECK_THROWS_AS(parse("tan(x1)", 3), ParseError);
  CHECK_THROWS_AS(parse("x1^1.5", 3), ParseError);
  try {
    parse("x1 + \n  * x2", 2);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 3);
  }
}

TEST_CASE("grammar details") {
  CHECK(at("-x1^2", {3}) == doctest::Approx(-9));
  CHECK(at("2^-1", {0}) == doctest::Approx(0.5));
  CHECK(at("1.5e2 - 50", {0}) == doctest::Approx(100));
  CHECK(at("8 / 4 / 2", {0}) == doctest::Approx(1));
  CHECK(at("10 - 4 - 3", {0}) == doctest::Approx(3));
  CHECK(at("abs(-2) * sqrt(9)", {0}) == doctest::Approx(6));
  CHECK(at("  ( x1 + x2 ) * x2 ", {1, 2}) == doctest::Approx(6));
}

TEST_CASE("evaluate") {
  CHECK(at("x1^2+x2^2+x3", {1, 2, 1}) == 6.0);
  CHECK(at("cos(x1-x2)", {0, 0}) == 1.0);
  CHECK_THROWS_AS(at("1/x1", {0}), EvalError);
  CHECK_THROWS_AS(at("sqrt(x1)", {-1}), EvalError);
  try {
    at("x1 + 1/(x1 - 2)", {2});
  } catch (const EvalError& e) {
    CHECK(e.subtree() == "1/(x1 - 2)");
  }
}

TEST_CASE("evaluation is bit reproducible") {
  Rng rng(7);
  for (int k = 0; k < 50; ++k) {
    Expr e = testing::random_smooth(rng, 3, 4);
    std::vector<double> x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    CHECK(evaluate(e, x) == evaluate(e, x));
  }
}

TEST_CASE("differentiate basic rules") {
  CHECK(to_string(differentiate(parse("x1^2", 1), 1)) == "2*x1");
  CHECK(to_string(differentiate(parse("x1^2+x2^2+x3", 3), 3)) == "1");
  CHECK(to_string(differentiate(parse("x2", 2), 1)) == "0");
  Expr d = differentiate(parse("x1^-2", 1), 1);
  CHECK(evaluate(d, std::vector<double>{2.0}) == doctest::Approx(-0.25));
}

TEST_CASE("gradient of sin(x1*x2) matches a central difference") {
  Expr e = parse("sin(x1*x2)", 2);
  std::vector<double> x{0.7, -1.3};
  for (std::size_t i = 1; i <= 2; ++i) {
    double sym = evaluate(differentiate(e, i), x);
    CHECK(std::fabs(sym - testing::central_difference(e, x, i)) <= 1e-8);
  }
}

TEST_CASE("abs is differentiable away from zero, flagged at zero") {
  Expr d = differentiate(parse("abs(x1)", 1), 1);
  CHECK(evaluate(d, std::vector<double>{-3.0}) == -1.0);
  CHECK_THROWS_AS(evaluate(d, std::vector<double>{0.0}), EvalError);
}

TEST_CASE("random expressions: symbolic gradient matches finite differences") {
  Rng rng(42);
  const std::size_t n = 3;
  int checked = 0;
  for (int k = 0; k < 100; ++k) {
    Expr e = testing::random_smooth(rng, n, 4);
    Rng pts = rng.split(k);
    for (const auto& x : sample_box(Box(n, Interval{-2, 2}), 100, pts)) {
      for (std::size_t i = 1; i <= n; ++i) {
        double sym = evaluate(differentiate(e, i), x);
        double fd = testing::central_difference(e, x, i);
        double tol = 1e-6 * (1.0 + std::fabs(sym));
        if (std::fabs(sym - fd) > tol) {
          FAIL_CHECK(to_string(e) << " d/dx" << i << " sym=" << sym << " fd=" << fd);
        }
        ++checked;
      }
    }
  }
  CHECK(checked == 100 * 100 * 3);
}

TEST_CASE("print then parse is the identity on 1000 random trees") {
  Rng rng(2024);
  for (int k = 0; k < 1000; ++k) {
    Expr e = testing::random_tree(rng, 4, 5);
    std::string s = to_string(e);
    Expr back = parse(s, 4);
    if (!structurally_equal(e, back)) FAIL_CHECK(s << " -> " << to_string(back));
  }
}

TEST_CASE("Lie derivative examples") {
  BuiltinModel m = example2();
  const ExprVector& f = m.system.f;
  Rng rng(3);
  auto pts = sample_box(m.system.domain, 50, rng);

  Expr ly = lie_derivative(parse("x1^2+x2^2+x3", 3), f);
  Expr psi5 = parse("-x1^2-x2^2+x3", 3);
  Expr l5 = lie_derivative(psi5, f);
  for (const auto& x : pts) {
    CHECK(evaluate(ly, x) == doctest::Approx(4.0 * x[2]).epsilon(1e-12));
    CHECK(evaluate(l5, x) == doctest::Approx(4.0 * evaluate(psi5, x)).epsilon(1e-12));
  }
  Expr l1 = lie_derivative(parse("x1", 1), ExprVector{parse("x1", 1)});
  CHECK(to_string(l1) == "x1");
  CHECK_THROWS_AS(lie_derivative(parse("x2", 2), ExprVector{parse("x1", 1)}),
                  std::invalid_argument);
}

TEST_CASE("Lie derivative is linear in h") {
  BuiltinModel m = nems_ring();
  const std::size_t n = m.system.n;
  Rng rng(11);
  for (int k = 0; k < 10; ++k) {
    Expr h1 = testing::random_smooth(rng, n, 3);
    Expr h2 = testing::random_smooth(rng, n, 3);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    Expr combined = lie_derivative(Expr::constant(a) * h1 + Expr::constant(b) * h2, m.system.f);
    Expr l1 = lie_derivative(h1, m.system.f);
    Expr l2 = lie_derivative(h2, m.system.f);
    Rng pts = rng.split(k);
    for (const auto& x : sample_box(m.system.domain, 20, pts)) {
      double lhs = evaluate(combined, x);
      double rhs = a * evaluate(l1, x) + b * evaluate(l2, x);
      double scale = std::fabs(a * evaluate(l1, x)) + std::fabs(b * evaluate(l2, x));
      CHECK(std::fabs(lhs - rhs) <= 1e-12 * (1.0 + scale) * 10);
    }
  }
}

TEST_CASE("complex expressions and substitution") {
  ComplexExpr z{parse("x1", 2), parse("x2", 2)};
  auto v = evaluate(z, std::vector<double>{1.0, -2.0});
  CHECK(v == std::complex<double>(1.0, -2.0));
  std::vector<std::size_t> swap{2, 1};
  Expr s = substitute_vars(parse("x1 - 2*x2", 2), swap);
  CHECK(evaluate(s, std::vector<double>{1.0, 3.0}) == doctest::Approx(1.0));
}

TEST_CASE("node budget") {
  Expr e = parse("sin(x1)*cos(x2)", 2);
  CHECK(node_count(e) == 5);
  CHECK(node_count(e, 3) > 3);
}
