#include <cmath>

#include "doctest.h"
#include "koopobs/models.hpp"
#include "koopobs/symmetry.hpp"

using namespace koopobs;

namespace {

std::vector<Point> samples_for(const NonlinearSystem& sys, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  return sample_box(sys.domain, count, rng);
}

const cd kOmega(-0.5, std::sqrt(3.0) / 2.0);

}  // namespace

TEST_CASE("permutation basics") {
  PermutationSymmetry p({2, 3, 1});
  CHECK(p.order() == 3);
  CHECK(p.power(3).is_identity());
  CHECK_FALSE(p.power(2).is_identity());
  CHECK(p.compose(p.inverse()).is_identity());
  CHECK(p.apply(std::vector<double>{10, 20, 30}) == Point{30, 10, 20});
  Matrix M = p.matrix();
  Vector x(3);
  x << 10, 20, 30;
  Vector px = M * x;
  CHECK(px[0] == 30);
  CHECK(px[1] == 10);
  CHECK(to_string(p) == "[2,3,1]");
  CHECK_THROWS_AS(PermutationSymmetry({1, 1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(PermutationSymmetry({0, 1}), std::invalid_argument);

  PermutationSymmetry mixed({2, 1, 4, 5, 3});
  CHECK(mixed.order() == 6);
  for (std::size_t k = 1; k < 6; ++k) CHECK_FALSE(mixed.power(k).is_identity());
  CHECK(mixed.power(6).is_identity());
}

TEST_CASE("candidate permutations") {
  auto c = candidate_permutations(3);
  // two nontrivial shifts and three reflections
  CHECK(c.size() == 5);
  for (const auto& p : c) CHECK_FALSE(p.is_identity());
  auto blocks = candidate_permutations(16, 2);
  PermutationSymmetry shift4({5, 6, 7, 8, 1, 2, 3, 4, 13, 14, 15, 16, 9, 10, 11, 12});
  CHECK(std::find(blocks.begin(), blocks.end(), shift4) != blocks.end());
}

TEST_CASE("state symmetry") {
  BuiltinModel m = example2();
  auto pts = samples_for(m.system, 200, 1);
  CHECK(verify_state_symmetry(m.system, PermutationSymmetry({2, 1, 3}), pts).passed);
  SymmetryCheck bad = verify_state_symmetry(m.system, PermutationSymmetry({3, 2, 1}), pts);
  CHECK_FALSE(bad.passed);
  // hand check at x = (1, 0, 0): f(Px) = (0, 0, 4) while P f(x) = (-2, 0, 1)
  CHECK(bad.residual > 1.0);
  CHECK_THROWS_AS(verify_state_symmetry(m.system, PermutationSymmetry::identity(3), pts),
                  std::invalid_argument);
  CHECK_THROWS_AS(verify_state_symmetry(m.system, PermutationSymmetry({2, 1}), pts),
                  std::invalid_argument);

  BuiltinModel nems = nems_ring();
  auto np = samples_for(nems.system, 200, 2);
  SymmetryCheck s = verify_state_symmetry(nems.system, nems.symmetry, np);
  CHECK(s.passed);
  CHECK(s.residual <= 1e-9);
}

TEST_CASE("measurement symmetry") {
  BuiltinModel m = example2();
  auto pts = samples_for(m.system, 200, 3);
  CHECK(verify_measurement_symmetry(m.system, m.symmetry, pts).passed);
  NonlinearSystem alt = m.system.with_measurement(*m.alt_measurement);
  CHECK_FALSE(verify_measurement_symmetry(alt, m.symmetry, pts).passed);

  BuiltinModel nems = nems_ring();
  SymmetryCheck s =
      verify_measurement_symmetry(nems.system, nems.symmetry, samples_for(nems.system, 200, 4));
  CHECK(s.passed);
  CHECK(s.residual <= 1e-9);
}

TEST_CASE("example2 classification") {
  BuiltinModel m = example2();
  auto pts = samples_for(m.system, 200, 5);
  SymmetryClassification c = classify_eigenfunctions(*m.koopman, m.symmetry, pts);
  CHECK(c.unresolved.empty());
  REQUIRE(c.rotational.size() == 1);
  CHECK(c.rotational[0].index == 4);
  CHECK(std::abs(c.rotational[0].c - 1.0) <= 1e-12);
  REQUIRE(c.reflectional.size() == 2);
  CHECK(c.reflectional[0].i == 0);
  CHECK(c.reflectional[0].j == 1);
  CHECK(c.reflectional[1].i == 2);
  CHECK(c.reflectional[1].j == 3);
  for (const auto& r : c.reflectional) {
    CHECK(std::abs(r.c - 1.0) <= 1e-12);
    CHECK(r.mutual);
  }
}

TEST_CASE("directed consensus is all rotational") {
  BuiltinModel d = consensus_directed();
  auto pts = samples_for(d.system, 200, 6);
  SymmetryClassification c = classify_eigenfunctions(*d.koopman, d.symmetry, pts);
  CHECK(c.reflectional.empty());
  REQUIRE(c.rotational.size() == 3);
  // constants from tools/oracles.py: psi_d2(Px) / psi_d2(x) = omega
  CHECK(std::abs(c.rotational[0].c - 1.0) <= 1e-10);
  CHECK(std::abs(c.rotational[1].c - kOmega) <= 1e-10);
  CHECK(std::abs(c.rotational[2].c - std::conj(kOmega)) <= 1e-10);
}

TEST_CASE("constant eigenfunction is rotational with c = 1") {
  BuiltinModel m = example2();
  KoopmanSet one{3, {{cd(0), ComplexExpr{Expr::constant(1.0), std::nullopt}, {1, 0, 0}}}};
  auto c = classify_eigenfunctions(one, m.symmetry, samples_for(m.system, 50, 7));
  REQUIRE(c.rotational.size() == 1);
  CHECK(std::abs(c.rotational[0].c - 1.0) <= 1e-14);
}

TEST_CASE("missing partner is unresolved") {
  BuiltinModel m = example2();
  KoopmanSet partial = *m.koopman;
  partial.pairs.erase(partial.pairs.begin() + 1);
  auto pts = samples_for(m.system, 50, 8);
  try {
    classify_eigenfunctions(partial, m.symmetry, pts);
    FAIL("expected classification failure");
  } catch (const PreconditionError& e) {
    CHECK(e.check() == "classification");
  }
  ClassifyOptions lax;
  lax.strict = false;
  auto c = classify_eigenfunctions(partial, m.symmetry, pts, lax);
  REQUIRE(c.unresolved.size() == 1);
  CHECK(c.unresolved[0] == 0);
  CHECK_THROWS_AS(induced_Q(c, partial.spectrum()), PreconditionError);
}

TEST_CASE("mode identities") {
  for (const auto& model : {example2(), consensus_directed(), consensus_undirected()}) {
    auto pts = samples_for(model.system, 200, 9);
    auto cls = classify_eigenfunctions(*model.koopman, model.symmetry, pts);
    ModeCheck mc = mode_symmetry_check(*model.koopman, model.symmetry, cls);
    CHECK(mc.passed);
    for (const auto& e : mc.entries) {
      if (e.applicable) CHECK(e.residual <= 1e-9);
    }
  }

  BuiltinModel m = example2();
  auto pts = samples_for(m.system, 200, 10);
  auto cls = classify_eigenfunctions(*m.koopman, m.symmetry, pts);
  KoopmanSet perturbed = *m.koopman;
  perturbed.pairs[1].mode[1] += 1e-3;
  CHECK_FALSE(mode_symmetry_check(perturbed, m.symmetry, cls).passed);
}

TEST_CASE("induced Koopman symmetry") {
  BuiltinModel m = example2();
  auto pts = samples_for(m.system, 200, 11);
  auto cls = classify_eigenfunctions(*m.koopman, m.symmetry, pts);
  InducedKoopmanSymmetry Q = induced_Q(cls, m.koopman->spectrum());
  Matrix expected(5, 5);
  expected << 0, 1, 0, 0, 0,
              1, 0, 0, 0, 0,
              0, 0, 0, 1, 0,
              0, 0, 1, 0, 0,
              0, 0, 0, 0, 1;
  CHECK(Q.Q == expected);
  CHECK_FALSE(Q.identity);

  BuiltinModel d = consensus_directed();
  auto dc = classify_eigenfunctions(*d.koopman, d.symmetry, samples_for(d.system, 200, 12));
  CHECK(induced_Q(dc, d.koopman->spectrum()).identity);

  BuiltinModel u = consensus_undirected();
  auto uc = classify_eigenfunctions(*u.koopman, u.symmetry, samples_for(u.system, 200, 13));
  InducedKoopmanSymmetry uq = induced_Q(uc, u.koopman->spectrum());
  CHECK(uq.perm == std::vector<std::size_t>{0, 2, 1});

  // a pairing across different eigenvalues does not commute with Lambda
  SymmetryClassification wrong;
  wrong.reflectional.push_back({0, 1, cd(1), 0.0, true});
  std::vector<cd> spec{1.0, 2.0};
  try {
    induced_Q(wrong, spec);
    FAIL("expected commutation failure");
  } catch (const PreconditionError& e) {
    CHECK(e.check() == "commutation");
  }
}

TEST_CASE("reflected eigenfunctions are eigenfunctions with the same eigenvalue") {
  for (const auto& model : {example2(), consensus_directed(), consensus_undirected()}) {
    auto pts = samples_for(model.system, 100, 14);
    for (const auto& p : model.koopman->pairs) {
      KoopmanEigenpair r = reflect_eigenpair(p, model.symmetry);
      CHECK(r.lambda == p.lambda);
      CHECK(validate_eigenpair(model.system, r, pts, model.koopman->validation_tol).passed);
    }
  }
}

TEST_CASE("reflectional pairs imply a repeated eigenvalue") {
  for (const auto& model : {example2(), consensus_directed(), consensus_undirected()}) {
    auto cls = classify_eigenfunctions(*model.koopman, model.symmetry,
                                       samples_for(model.system, 100, 15));
    if (cls.reflectional.empty()) continue;
    std::size_t rmax = 0;
    for (const auto& g : group_eigenvalues(model.koopman->spectrum())) {
      rmax = std::max(rmax, g.multiplicity);
    }
    CHECK(rmax >= 2);
  }
}

TEST_CASE("symmetry verdicts") {
  BuiltinModel m = example2();
  auto pts = samples_for(m.system, 200, 16);
  auto groups = group_eigenvalues(m.koopman->spectrum());
  SymmetryVerdict v = symmetry_verdict(m.system, m.symmetry, pts, groups);
  CHECK(v.route == SymmetryRoute::MeasurementSymmetric);
  CHECK(v.verdict == Verdict::Unobservable);
  CHECK(v.has_witness);

  BuiltinModel u = consensus_undirected();
  auto ug = group_eigenvalues(u.koopman->spectrum(), 1e-3);
  SymmetryVerdict uv = symmetry_verdict(u.system, u.symmetry, samples_for(u.system, 200, 17), ug);
  CHECK(uv.route == SymmetryRoute::MultiplicityExceedsOutputs);
  CHECK(uv.verdict == Verdict::Unobservable);
  CHECK(uv.rationale.find("q=1 < max multiplicity 2") != std::string::npos);

  BuiltinModel d = consensus_directed();
  auto dg = group_eigenvalues(d.koopman->spectrum());
  SymmetryVerdict dv = symmetry_verdict(d.system, d.symmetry, samples_for(d.system, 200, 18), dg);
  CHECK(dv.route == SymmetryRoute::Inconclusive);
  CHECK(dv.verdict == Verdict::Inconclusive);

  CHECK_THROWS_AS(symmetry_verdict(m.system, PermutationSymmetry({3, 2, 1}), pts, groups),
                  PreconditionError);
}

TEST_CASE("symmetric measurement means unobservable by the rank test") {
  for (auto [model, alt] : {std::pair{example2(), false}, std::pair{consensus_undirected(), true}}) {
    NonlinearSystem sys = alt ? model.system.with_measurement(*model.alt_measurement) : model.system;
    auto pts = samples_for(sys, 200, 19);
    REQUIRE(verify_state_symmetry(sys, model.symmetry, pts).passed);
    REQUIRE(verify_measurement_symmetry(sys, model.symmetry, pts).passed);
    RankTolerances tol;
    tol.group = 1e-3;
    CHECK(koopman_rank_test(build_canonical(sys, *model.koopman, pts), tol).verdict ==
          Verdict::Unobservable);
  }
}

TEST_CASE("symmetric pairs of initial states give identical outputs") {
  for (const auto& model : {example2(), consensus_undirected(), nems_ring()}) {
    NonlinearSystem sys = model.system;
    if (model.name.rfind("consensus", 0) == 0) sys = sys.with_measurement(*model.alt_measurement);
    Rng rng(20);
    const double t = model.name == "nems-ring" ? 5.0 : 1.0;
    for (const auto& x0 : sample_box(sys.domain, 3, rng)) {
      Point start = x0;
      if (model.name == "nems-ring") {
        for (std::size_t i = 0; i < 8; ++i) start[i] = 0.8 + 0.4 * (start[i] - 0.5);
      }
      double d = measurement_distance(flow(sys, start, t), flow(sys, model.symmetry.apply(start), t));
      CHECK(d <= 1e-7);
    }
  }
}
