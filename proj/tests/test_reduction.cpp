#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sds/reduction.hpp"

using namespace sds;

namespace {

Expr half() { return Expr::rational(Rational(1, 2)); }
Expr R() { return Expr::symbol("r"); }
Expr H() { return Expr::symbol("h"); }

GroupAction rotation_action() {
    Chart c = plane_chart();
    GroupAction g;
    g.chart = c;
    VectorField rot = VectorField::zero(c);
    rot.comps[0] = Expr::integer(-1) * Expr::symbol("y");
    rot.comps[1] = Expr::symbol("x");
    g.generators = {rot};
    return g;
}

QuotientMap identity_map(const Chart& c) {
    QuotientMap phi;
    phi.source = c;
    phi.target = c;
    for (const auto& spec : c.coords) {
        phi.components.push_back(Expr::symbol(spec.name));
        phi.section.push_back(Expr::symbol(spec.name));
    }
    return phi;
}

} // namespace

TEST_CASE("strict invariance distinguishes field-wise symmetry") {
    // the rotation drift is invariant under its own flow, unit noise is not
    GroupAction so2 = rotation_action();
    Sds rot_only;
    rot_only.chart = so2.chart;
    rot_only.drift = so2.generators[0];
    InvarianceReport self = strict_invariance(rot_only, so2);
    CHECK(self.ok());
    CHECK(self.symbolic());

    Sds osc = damped_oscillator(Expr::symbol("c"));
    InvarianceReport broken = strict_invariance(osc, so2);
    CHECK_FALSE(broken.ok());
    // the offending entries are the constant noise fields
    CHECK_FALSE(broken.verdicts[0][1].ok());
    CHECK_FALSE(broken.verdicts[0][2].ok());

    InvarianceReport shifts = strict_invariance(brownian(2), translation_action(2));
    CHECK(shifts.ok());
    CHECK(shifts.symbolic());
}

TEST_CASE("diffusion invariance is weaker than strict invariance") {
    GroupAction so2 = rotation_action();
    Sds osc = damped_oscillator(ufunc("f", R()));
    CHECK_FALSE(strict_invariance(osc, so2).ok());
    DiffusionInvarianceReport inv = diffusion_invariance(osc, so2);
    CHECK(inv.ok());
    CHECK(inv.symbolic());
}

TEST_CASE("laplacian commutes with all rotations") {
    DiffusionInvarianceReport inv = diffusion_invariance(brownian(3), so_n_action(3));
    REQUIRE(inv.verdicts.size() == 3);
    CHECK(inv.ok());
    CHECK(inv.symbolic());

    // a translation drift breaks rotational symmetry
    Sds shifted = brownian(2);
    shifted.drift.comps[0] = Expr::integer(1);
    GroupAction so2;
    so2.chart = shifted.chart;
    VectorField rot = VectorField::zero(shifted.chart);
    rot.comps[0] = Expr::integer(-1) * Expr::symbol("x2");
    rot.comps[1] = Expr::symbol("x1");
    so2.generators = {rot};
    CHECK_FALSE(diffusion_invariance(shifted, so2).ok());
}

TEST_CASE("strict invariance implies diffusion invariance on the bundled pairs") {
    CHECK(strict_invariance(brownian(2), translation_action(2)).ok());
    CHECK(diffusion_invariance(brownian(2), translation_action(2)).ok());

    GroupAction so2 = rotation_action();
    Sds rot_only;
    rot_only.chart = so2.chart;
    rot_only.drift = so2.generators[0];
    CHECK(strict_invariance(rot_only, so2).ok());
    CHECK(diffusion_invariance(rot_only, so2).ok());
}

TEST_CASE("submersion checks") {
    CHECK(submersion_check(radius_map(3)).full_rank);
    CHECK(submersion_check(energy_map()).full_rank);
    CHECK(submersion_check(torus_projection()).full_rank);

    QuotientMap flat;
    flat.source = plane_chart();
    flat.target = half_line_chart("u");
    flat.components = {Expr::integer(1)};
    SubmersionReport rep = submersion_check(flat);
    CHECK_FALSE(rep.full_rank);
    CHECK(rep.min_rank == 0);
}

TEST_CASE("radial reduction of brownian motion") {
    for (int n = 2; n <= 5; ++n) {
        ProjectionReport rep = project_generator(generator(brownian(n)), radius_map(n));
        REQUIRE(rep.ok);
        CHECK(rep.symbolic_form);
        CHECK(rep.rewrite.symbolic());
        Expr drift = rep.reduced.coefficient({1});
        Expr expected = Expr::rational(Rational(n - 1, 2)) / R();
        CHECK((drift - expected).is_zero_literal());
        CHECK(rep.reduced.coefficient({2}) == half());
        CHECK(rep.reduced.coef.size() == 2);

        Sds realized = realize_sds(rep.reduced);
        REQUIRE(realized.noise.size() == 1);
        CHECK(realized.noise[0].comps[0] == Expr::integer(1));
        CHECK((realized.drift.comps[0] - expected).is_zero_literal());
    }
}

TEST_CASE("energy reduction of the damped oscillator") {
    Sds osc = damped_oscillator(ufunc("f", R()));
    ProjectionReport rep = project_generator(generator(osc), energy_map());
    REQUIRE(rep.ok);
    CHECK(rep.symbolic_form);
    CHECK(rep.rewrite.symbolic());

    // generator coefficients: drift 1 - 2 h f, diffusion h
    Expr f_h = ufunc("f", sqrt(Expr::integer(2) * H()));
    Expr gen_drift = Expr::integer(1) - Expr::integer(2) * H() * f_h;
    CHECK((rep.reduced.coefficient({1}) - gen_drift).is_zero_literal());
    CHECK((rep.reduced.coefficient({2}) - H()).is_zero_literal());

    // realized system: noise sqrt(2h), drift 1/2 - 2 h f
    Sds reduced = realize_sds(rep.reduced);
    REQUIRE(reduced.noise.size() == 1);
    Expr noise_expected = sqrt(Expr::integer(2) * H());
    CHECK((reduced.noise[0].comps[0] - noise_expected).is_zero_literal());
    Expr drift_expected = half() - Expr::integer(2) * H() * f_h;
    CHECK((reduced.drift.comps[0] - drift_expected).is_zero_literal());
}

TEST_CASE("radius reduction of the damped oscillator with constant damping") {
    Sds osc = damped_oscillator(Expr::symbol("c"));
    QuotientMap phi;
    phi.source = osc.chart;
    phi.target = half_line_chart("r");
    Expr x = Expr::symbol("x"), y = Expr::symbol("y");
    phi.components = {sqrt(x * x + y * y)};
    phi.section = {R(), Expr()};
    ProjectionReport rep = project_generator(generator(osc), phi);
    REQUIRE(rep.ok);
    Sds reduced = realize_sds(rep.reduced);
    REQUIRE(reduced.noise.size() == 1);
    CHECK(reduced.noise[0].comps[0] == Expr::integer(1));
    Expr drift_expected = half() / R() - Expr::symbol("c") * R();
    CHECK((reduced.drift.comps[0] - drift_expected).is_zero_literal());
}

TEST_CASE("projection is a diffusion morphism on test monomials") {
    // A_src(f o Phi) = (A_red f) o Phi for target monomials up to degree 3
    struct Case { Sds sds; QuotientMap phi; };
    std::vector<Case> cases;
    cases.push_back({brownian(3), radius_map(3)});
    cases.push_back({damped_oscillator(ufunc("f", R())), energy_map()});
    for (auto& [sds_, phi] : cases) {
        DiffOp a = generator(sds_);
        ProjectionReport rep = project_generator(a, phi);
        REQUIRE(rep.ok);
        std::map<std::string, Expr> up;
        up[phi.target.coords[0].name] = phi.components[0];
        SampleDomain dom = phi.source.sample_domain();
        Expr u = Expr::symbol(phi.target.coords[0].name);
        for (int deg = 1; deg <= 3; ++deg) {
            Expr f = u.pow(deg);
            Expr lhs = a.apply(f.substitute(up));
            Expr rhs = rep.reduced.apply(f).substitute(up);
            CHECK(is_zero(lhs - rhs, dom).ok());
        }
    }
}

TEST_CASE("torus drift cannot be projected") {
    Sds x = torus_counterexample();
    ProjectionReport rep = project_generator(generator(x), torus_projection());
    CHECK_FALSE(rep.ok);
    REQUIRE_FALSE(rep.witnesses.empty());
    const FiberPair& w = rep.witnesses.front();
    CHECK(w.separation > 1e-3);
    // both witness points must sit on one fiber
    QuotientMap phi = torus_projection();
    CHECK(phi.forward(w.x).at("theta2") == doctest::Approx(phi.forward(w.y).at("theta2")).epsilon(1e-9));
}

TEST_CASE("deterministic projectability fails on the torus with the pinned pair") {
    Sds x = torus_counterexample();
    QuotientMap phi = torus_projection();
    ProjectabilityReport rep = projectability_check(x, phi, ProjectabilityMode::Deterministic);
    CHECK_FALSE(rep.pass);
    CHECK(rep.witness.has_value());

    // the canonical separating pair: theta1 = 0 versus theta1 = 1/4
    std::map<std::string, double> a = {{"theta1", 0.0}, {"theta2", 0.3}};
    std::map<std::string, double> b = {{"theta1", 0.25}, {"theta2", 0.3}};
    double pa = x.drift.comps[1].eval(a);
    double pb = x.drift.comps[1].eval(b);
    CHECK(pa == doctest::Approx(0.0));
    CHECK(pb == doctest::Approx(1.0));
}

TEST_CASE("projectability of brownian motion through the radius") {
    ProjectabilityReport rep =
        projectability_check(brownian(3), radius_map(3), ProjectabilityMode::Diffusion);
    CHECK(rep.pass);

    // strict mode fails: constant fields push forward differently along a fiber
    ProjectabilityReport strict =
        projectability_check(brownian(3), radius_map(3), ProjectabilityMode::Strict);
    CHECK_FALSE(strict.pass);
    CHECK(strict.witness.has_value());
}

TEST_CASE("identity map projects everything") {
    Sds osc = damped_oscillator(Expr::symbol("c"));
    QuotientMap id = identity_map(osc.chart);
    CHECK(projectability_check(osc, id, ProjectabilityMode::Strict).pass);
    CHECK(projectability_check(osc, id, ProjectabilityMode::Diffusion).pass);

    Sds det = torus_counterexample();
    QuotientMap idt = identity_map(det.chart);
    CHECK(projectability_check(det, idt, ProjectabilityMode::Deterministic).pass);
}

TEST_CASE("deterministic mode refuses noisy systems") {
    CHECK_THROWS_AS(
        projectability_check(brownian(2), radius_map(2), ProjectabilityMode::Deterministic),
        std::invalid_argument);
}

TEST_CASE("realize_sds on the stock generators") {
    // flat laplacian: unit noise, no drift
    Sds flat = realize_sds(generator(brownian(2)));
    CHECK(flat.drift.is_zero());
    REQUIRE(flat.noise.size() == 2);
    CHECK(flat.noise[0].comps[0] == Expr::integer(1));
    CHECK(flat.noise[1].comps[1] == Expr::integer(1));

    // state-dependent diagonal case picks up a drift correction
    Chart hl = half_line_chart("x");
    DiffOp a = DiffOp::zero(hl);
    Expr x = Expr::symbol("x");
    a.set({2}, half() * x * x);
    Sds s = realize_sds(a);
    REQUIRE(s.noise.size() == 1);
    CHECK((s.noise[0].comps[0] - x).is_zero_literal());
    CHECK((s.drift.comps[0] + half() * x).is_zero_literal());
    CHECK(diffusion_equivalent(generator(s), a).ok());
}

TEST_CASE("realize_sds with a non-diagonal diffusion matrix") {
    Chart c = plane_chart();
    DiffOp a = DiffOp::zero(c);
    a.set({2, 0}, Expr::integer(1));
    a.set({1, 1}, Expr::integer(2));
    a.set({0, 2}, Expr::integer(2));
    Sds s = realize_sds(a);
    CHECK(s.noise.size() == 2);
    ZeroVerdict v = diffusion_equivalent(generator(s), a);
    CHECK(v.ok());
    CHECK(v.symbolic());
}

TEST_CASE("realize_sds accepts semidefinite matrices with redundant directions") {
    Chart c = plane_chart();
    DiffOp a = DiffOp::zero(c);
    // 2a = [[1,1],[1,1]], a single field along (1,1)
    a.set({2, 0}, half());
    a.set({1, 1}, Expr::integer(1));
    a.set({0, 2}, half());
    Sds s = realize_sds(a);
    REQUIRE(s.noise.size() == 1);
    CHECK(diffusion_equivalent(generator(s), a).ok());
}

TEST_CASE("realize_sds rejects indefinite input") {
    Chart c = plane_chart();
    DiffOp a = DiffOp::zero(c);
    a.set({2, 0}, Expr::integer(-1));
    CHECK_THROWS_AS(realize_sds(a), std::invalid_argument);
}

TEST_CASE("polar generator identity for the oscillator") {
    // the polar rewrite of the system is diffusion equivalent to the known
    // split form: d_theta + (1/(2r) - r f) d_r + 1/2 d_r^2 + 1/(2r^2) d_theta^2
    Sds polar = damped_oscillator_polar(ufunc("f", R()));
    DiffOp a = generator(polar);
    Chart c = polar.chart;
    DiffOp expected = DiffOp::zero(c);
    expected.set({1, 0}, Expr::integer(1));
    expected.set({0, 1}, half() / R() - R() * ufunc("f", R()));
    expected.set({0, 2}, half());
    expected.set({2, 0}, half() * R().pow(-2));
    ZeroVerdict v = diffusion_equivalent(a, expected);
    CHECK(v.ok());
    CHECK(v.symbolic());
}

TEST_CASE("radial and angular split of the oscillator") {
    Sds polar = damped_oscillator_polar(ufunc("f", R()));
    RadialAngularSplit split = radial_angular_decompose(polar);

    // radial: (1/(2r) - r f) d_r + d_r o dB
    CHECK(split.radial.drift.comps[0].is_zero_literal());
    Expr g = half() / R() - R() * ufunc("f", R());
    CHECK((split.radial.drift.comps[1] - g).is_zero_literal());
    REQUIRE(split.radial.noise.size() == 1);
    CHECK(split.radial.noise[0].comps[1] == Expr::integer(1));
    CHECK(split.radial.noise[0].comps[0].is_zero_literal());

    // angular: d_theta + (1/r) d_theta o dB
    CHECK(split.angular.drift.comps[0] == Expr::integer(1));
    CHECK(split.angular.drift.comps[1].is_zero_literal());
    REQUIRE(split.angular.noise.size() == 1);
    CHECK((split.angular.noise[0].comps[0] - Expr::integer(1) / R()).is_zero_literal());
    CHECK(split.angular.noise[0].comps[1].is_zero_literal());

    // the generators add back up to the full generator
    DiffOp sum = generator(split.radial) + generator(split.angular);
    ZeroVerdict v = diffusion_equivalent(sum, generator(polar));
    CHECK(v.ok());
    CHECK(v.symbolic());
}

TEST_CASE("radial and angular split of plain brownian motion") {
    RadialAngularSplit split = radial_angular_decompose(brownian_polar());
    CHECK((split.radial.drift.comps[1] - half() / R()).is_zero_literal());
    REQUIRE(split.radial.noise.size() == 1);
    CHECK(split.radial.noise[0].comps[1] == Expr::integer(1));
    CHECK(split.angular.drift.is_zero());
    REQUIRE(split.angular.noise.size() == 1);
    CHECK((split.angular.noise[0].comps[0] - Expr::integer(1) / R()).is_zero_literal());
}

TEST_CASE("pure rotation splits into a drift-only angular part") {
    Chart c = polar_chart();
    Sds rot;
    rot.chart = c;
    rot.drift = VectorField::zero(c);
    rot.drift.comps[0] = Expr::integer(1);
    RadialAngularSplit split = radial_angular_decompose(rot);
    CHECK(split.radial.drift.is_zero());
    CHECK(split.radial.noise.empty());
    CHECK(split.angular.drift.comps[0] == Expr::integer(1));
    CHECK(split.angular.noise.empty());
}

TEST_CASE("angle-dependent systems refuse to split") {
    Chart c = polar_chart();
    Sds bad;
    bad.chart = c;
    bad.drift = VectorField::zero(c);
    bad.drift.comps[1] = sin(Expr::symbol("theta"));
    CHECK_THROWS_AS(radial_angular_decompose(bad), std::invalid_argument);
}

TEST_CASE("harmonic system: invariant diffusion-wise, sphere not invariant") {
    Sds h = harmonic_hamiltonian(2);
    GroupAction t1;
    t1.chart = h.chart;
    t1.generators = {h.drift};
    DiffusionInvarianceReport inv = diffusion_invariance(h, t1);
    CHECK(inv.ok());
    CHECK(inv.symbolic());

    Expr hf;
    for (const auto& spec : h.chart.coords) {
        Expr z = Expr::symbol(spec.name);
        hf += half() * z * z;
    }
    LevelSetReport sphere = invariant_level_set(h, {hf}, {1.0});
    CHECK(sphere.located());
    CHECK_FALSE(sphere.invariant());
    REQUIRE_FALSE(sphere.violations.empty());
    bool noise_breaks = false;
    for (const auto& w : sphere.violations)
        if (w.field_index >= 1) noise_breaks = true;
    CHECK(noise_breaks);
}

TEST_CASE("builtins reject bad arguments") {
    CHECK_THROWS_AS(bessel(0), std::invalid_argument);
    CHECK_THROWS_AS(brownian(0), std::invalid_argument);
    CHECK_THROWS_AS(harmonic_hamiltonian(0), std::invalid_argument);
}

TEST_CASE("bessel builtin matches the reduced brownian system") {
    Sds b3 = bessel(3);
    CHECK((b3.drift.comps[0] - Expr::integer(1) / R()).is_zero_literal());
    ProjectionReport rep = project_generator(generator(brownian(3)), radius_map(3));
    REQUIRE(rep.ok);
    ZeroVerdict v = diffusion_equivalent(generator(b3), rep.reduced);
    CHECK(v.ok());
    CHECK(v.symbolic());
}
