#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "koopobs/models.hpp"

using namespace koopobs;

namespace {

std::vector<Point> samples_for(const NonlinearSystem& sys, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  return sample_box(sys.domain, count, rng);
}

std::vector<cd> sorted(std::vector<cd> s) {
  std::sort(s.begin(), s.end(), [](cd a, cd b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return s;
}

}  // namespace

TEST_CASE("consensus matrices and spectra") {
  BuiltinModel u = consensus_undirected();
  Matrix Au(3, 3);
  Au << -2, 1, 1, 1, -2, 1, 1, 1, -2;
  auto su = sorted(linear_koopman_extract(Au).spectrum());
  CHECK(std::abs(su[0] - cd(-3)) <= 1e-10);
  CHECK(std::abs(su[1] - cd(-3)) <= 1e-10);
  CHECK(std::abs(su[2] - cd(0)) <= 1e-10);
  auto packaged = sorted(u.koopman->spectrum());
  CHECK(packaged == std::vector<cd>{-3, -3, 0});

  // printed psi_u2 coefficients sum to zero
  const ComplexExpr& psi2 = u.koopman->pairs[1].psi;
  double sum = evaluate(psi2, std::vector<double>{1, 1, 1}).real();
  CHECK(std::fabs(sum) <= 1e-3);

  Matrix Ad(3, 3);
  Ad << -1, 0, 1, 1, -1, 0, 0, 1, -1;
  auto sd = linear_koopman_extract(Ad).spectrum();
  // roots of l^3 + 3 l^2 + 3 l (tools/oracles.py)
  auto sds = sorted(sd);
  CHECK(std::abs(sds[0] - cd(-1.5, -std::sqrt(3.0) / 2)) <= 1e-10);
  CHECK(std::abs(sds[1] - cd(-1.5, std::sqrt(3.0) / 2)) <= 1e-10);
  CHECK(std::abs(sds[2]) <= 1e-10);
  for (cd l : sd) {
    if (std::abs(l) > 1e-6) {
      CHECK(std::abs(l) == doctest::Approx(std::sqrt(3.0)));
      CHECK(std::fabs(std::arg(l)) == doctest::Approx(5 * M_PI / 6));
    }
  }
  CHECK(sorted(consensus_directed().koopman->spectrum())[1].imag() > 0);
}

TEST_CASE("linear_koopman_extract") {
  Matrix D(2, 2);
  D << 2, 0, 0, 3;
  KoopmanSet k = linear_koopman_extract(D);
  REQUIRE(k.size() == 2);
  for (const auto& p : k.pairs) {
    std::size_t which = p.lambda.real() == 2.0 ? 0 : 1;
    Point e(2, 0.0);
    e[which] = 1.0;
    CHECK(std::abs(evaluate(p.psi, e) - 1.0) <= 1e-14);
    CHECK(std::abs(p.mode[which] - 1.0) <= 1e-14);
  }

  Matrix J(2, 2);
  J << 1, 1, 0, 1;
  try {
    linear_koopman_extract(J);
    FAIL("expected a defective-matrix error");
  } catch (const PreconditionError& e) {
    CHECK(e.check() == "diagonalizable");
  }

  Matrix Ad(3, 3);
  Ad << -1, 0, 1, 1, -1, 0, 0, 1, -1;
  LinearSystemModel lm = linear_model("d", Ad, {parse("x1", 3)}, Box(3, Interval{-2, 2}));
  KoopmanSet kd = linear_koopman_extract(Ad);
  auto pts = samples_for(lm.system, 100, 1);
  for (const auto& p : kd.pairs) CHECK(validate_eigenpair(lm.system, p, pts).passed);
  CanonicalSystem cs = build_canonical(lm.system, kd, pts);
  CHECK(cs.N == 3);

  for (const auto& x : pts) {
    Vector ax = Ad * Vector::Map(x.data(), 3);
    auto fx = evaluate(lm.system.f, x);
    for (int i = 0; i < 3; ++i) CHECK(fx[i] == ax[i]);
  }
}

TEST_CASE("example2 model") {
  BuiltinModel m = example2();
  CHECK(m.system.n == 3);
  CHECK(m.system.q == 1);
  REQUIRE(m.alt_measurement);
  CHECK(m.alt_measurement->size() == 2);
  auto pts = samples_for(m.system, 100, 2);
  std::vector<cd> spec{1, 1, 2, 2, 4};
  CHECK(m.koopman->spectrum() == spec);
  for (const auto& p : m.koopman->pairs) CHECK(validate_eigenpair(m.system, p, pts).passed);
  CHECK(m.koopman->pairs[0].mode == std::vector<cd>{1, 0, 0});
  CHECK(m.koopman->pairs[4].mode == std::vector<cd>{0, 0, 1});

  CanonicalSystem cs = build_canonical(*m.koopman, pts);
  Point x{0.3, -0.7, 1.1};
  Vector back = reconstruct_state(cs, transform(cs, x));
  for (int i = 0; i < 3; ++i) CHECK(std::fabs(back[i] - x[i]) <= 1e-10);
  CHECK(m.symmetry == PermutationSymmetry({2, 1, 3}));
}

TEST_CASE("packaged Koopman sets pass every check") {
  for (const auto& name : builtin_model_names()) {
    BuiltinModel m = builtin_model(name);
    if (!m.koopman) {
      CHECK(name == "nems-ring");
      continue;
    }
    auto pts = samples_for(m.system, 200, 3);
    for (const auto& p : m.koopman->pairs) {
      CHECK(validate_eigenpair(m.system, p, pts, m.koopman->validation_tol).passed);
    }
    CHECK_NOTHROW(check_koopman_set(*m.koopman, pts));
    CHECK_NOTHROW(build_canonical(m.system, *m.koopman, pts));
  }
  CHECK_THROWS_AS(builtin_model("nope"), std::invalid_argument);
}

TEST_CASE("NEMS ring") {
  BuiltinModel m = nems_ring();
  CHECK(m.system.n == 16);
  CHECK(m.system.q == 1);
  CHECK_FALSE(m.koopman.has_value());
  CHECK(m.symmetry ==
        PermutationSymmetry({5, 6, 7, 8, 1, 2, 3, 4, 13, 14, 15, 16, 9, 10, 11, 12}));

  Point sync(16, 1.0);
  for (std::size_t i = 8; i < 16; ++i) sync[i] = 0.4;
  auto f = evaluate(m.system.f, sync);
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::fabs(f[i]) <= 1e-15);
  for (std::size_t i = 8; i < 16; ++i) CHECK(f[i] == doctest::Approx(1.0));
  CHECK(evaluate(m.system.h, sync)[0] == doctest::Approx(8.0));

  BuiltinModel fast = nems_ring(5, 2.0, 0.3);
  Point s5(10, 1.0);
  auto f5 = evaluate(fast.system.f, s5);
  CHECK(f5[5] == doctest::Approx(2.0));

  CHECK_THROWS_AS(nems_ring(2), std::invalid_argument);

  Point x0 = nems_initial_condition(8, 42);
  CHECK(x0 == nems_initial_condition(8, 42));
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(x0[i] >= 0.8);
    CHECK(x0[i] <= 1.2);
    CHECK(x0[8 + i] > -M_PI);
    CHECK(x0[8 + i] <= M_PI);
  }
  auto pts = samples_for(m.system, 200, 4);
  CHECK(verify_state_symmetry(m.system, m.symmetry, pts).passed);
}

TEST_CASE("NEMS shifted trajectories swap blocks") {
  BuiltinModel m = nems_ring();
  Point x0 = nems_initial_condition(8, 42);
  Trajectory a = flow(m.system, x0, 50.0, {1e-3, 100});
  Trajectory b = flow(m.system, m.symmetry.apply(x0), 50.0, {1e-3, 100});
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < 4; ++i) {
      worst = std::max(worst, std::fabs(a.states[k][i] - b.states[k][i + 4]));
      worst = std::max(worst, std::fabs(a.states[k][8 + i] - b.states[k][12 + i]));
    }
  }
  CHECK(worst <= 1e-7);
  CHECK(measurement_distance(a, b) <= 1e-6);
}
