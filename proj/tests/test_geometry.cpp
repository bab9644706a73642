#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "sds/geometry.hpp"

using namespace sds;

namespace {

Chart plane() {
    Chart c;
    c.name = "plane";
    c.coords = {{"x"}, {"y"}};
    return c;
}

Chart polar() {
    Chart c;
    c.name = "polar";
    CoordSpec theta;
    theta.name = "theta";
    theta.periodic = true;
    theta.period = Expr::integer(2) * Expr::pi();
    CoordSpec r;
    r.name = "r";
    r.lower = 0.0;
    c.coords = {theta, r};
    return c;
}

VectorField field(const Chart& c, std::vector<Expr> comps) {
    VectorField v;
    v.chart = c;
    v.comps = std::move(comps);
    return v;
}

Expr X() { return Expr::symbol("x"); }
Expr Y() { return Expr::symbol("y"); }

VectorField random_poly_field(const Chart& c, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> coef(-2, 2);
    std::vector<Expr> comps;
    for (int j = 0; j < c.dim(); ++j) {
        Expr e = Expr::integer(coef(rng)) + Expr::integer(coef(rng)) * X() +
                 Expr::integer(coef(rng)) * Y() + Expr::integer(coef(rng)) * X() * Y();
        comps.push_back(e);
    }
    return comps.empty() ? VectorField{} : field(c, comps);
}

} // namespace

TEST_CASE("chart lookup and sampling boxes") {
    Chart p = polar();
    CHECK(p.dim() == 2);
    CHECK(p.index_of("r") == 1);
    CHECK(p.index_of("z") == -1);

    SampleDomain dom = p.sample_domain();
    CHECK(dom[0].lo == doctest::Approx(0.0));
    CHECK(dom[0].hi == doctest::Approx(6.283185307));
    CHECK(dom[1].lo == doctest::Approx(0.1));
    CHECK(dom[1].hi == doctest::Approx(3.0));
    CHECK(p.positive_coords() == std::set<std::string>{"r"});

    Chart pl = plane();
    SampleDomain d2 = pl.sample_domain();
    CHECK(d2[0].lo == doctest::Approx(-2.0));
    CHECK(d2[1].hi == doctest::Approx(2.0));
}

TEST_CASE("apply_field is a derivation") {
    Chart c = plane();
    VectorField rot = field(c, {-Y(), X()});
    Expr h = (X() * X() + Y() * Y()) / Expr::integer(2);
    CHECK(apply_field(rot, h).is_zero_literal());

    VectorField dx = field(c, {Expr::integer(1), Expr()});
    CHECK(apply_field(dx, h) == X());

    // derivation property X(fg) = X(f) g + f X(g)
    std::mt19937_64 rng(3);
    for (int i = 0; i < 30; ++i) {
        VectorField v = random_poly_field(c, rng);
        Expr f = X() * X() + Expr::integer(2) * Y();
        Expr g = X() * Y() - Expr::integer(1);
        Expr lhs = apply_field(v, f * g);
        Expr rhs = apply_field(v, f) * g + f * apply_field(v, g);
        CHECK(is_zero(lhs - rhs).symbolic());
    }
}

TEST_CASE("lie bracket on rotation and translations") {
    Chart c = plane();
    VectorField rot = field(c, {-Y(), X()});
    VectorField dx = field(c, {Expr::integer(1), Expr()});
    VectorField dy = field(c, {Expr(), Expr::integer(1)});

    VectorField b = lie_bracket(rot, dx);
    CHECK(b.comps[0].is_zero_literal());
    CHECK(b.comps[1] == -Expr::integer(1));
    VectorField b2 = lie_bracket(rot, dy);
    CHECK(b2.comps[0] == Expr::integer(1));
    CHECK(b2.comps[1].is_zero_literal());
}

TEST_CASE("bracket laws: antisymmetry, Jacobi, Leibniz") {
    Chart c = plane();
    std::mt19937_64 rng(17);
    for (int i = 0; i < 25; ++i) {
        VectorField A = random_poly_field(c, rng);
        VectorField B = random_poly_field(c, rng);
        VectorField C = random_poly_field(c, rng);

        VectorField ab = lie_bracket(A, B);
        VectorField ba = lie_bracket(B, A);
        for (int j = 0; j < c.dim(); ++j)
            CHECK(is_zero(ab.comps[j] + ba.comps[j]).symbolic());

        // Jacobi: [[A,B],C] + [[B,C],A] + [[C,A],B] = 0
        VectorField j1 = lie_bracket(ab, C);
        VectorField j2 = lie_bracket(lie_bracket(B, C), A);
        VectorField j3 = lie_bracket(lie_bracket(C, A), B);
        for (int j = 0; j < c.dim(); ++j)
            CHECK(is_zero(j1.comps[j] + j2.comps[j] + j3.comps[j]).symbolic());

        // Leibniz in the second slot: [A, fB] = f[A,B] + A(f) B
        Expr f = X() * Y() + Expr::integer(1);
        VectorField fB = B;
        for (auto& comp : fB.comps) comp = f * comp;
        VectorField lhs = lie_bracket(A, fB);
        for (int j = 0; j < c.dim(); ++j) {
            Expr rhs = f * ab.comps[j] + apply_field(A, f) * B.comps[j];
            CHECK(is_zero(lhs.comps[j] - rhs).symbolic());
        }
    }
}

TEST_CASE("bracket across charts is rejected") {
    VectorField a = field(plane(), {X(), Y()});
    VectorField b = field(polar(), {Expr::integer(1), Expr()});
    CHECK_THROWS_AS(lie_bracket(a, b), std::invalid_argument);
}

TEST_CASE("so(2) and so(3) generators close; a broken family does not") {
    Chart c = plane();
    GroupAction rot2{c, {field(c, {-Y(), X()})}};
    CHECK(closure_check(rot2).closed());

    Chart r3;
    r3.name = "r3";
    r3.coords = {{"x"}, {"y"}, {"z"}};
    Expr Z = Expr::symbol("z");
    VectorField jxy = field(r3, {-Y(), X(), Expr()});
    VectorField jyz = field(r3, {Expr(), -Z, Y()});
    VectorField jzx = field(r3, {Z, Expr(), -X()});
    GroupAction so3{r3, {jxy, jyz, jzx}};
    CHECK(closure_check(so3).closed());

    // contact-type pair: bracket points out of the generators' span
    VectorField e1 = field(r3, {Expr::integer(1), Expr(), Expr()});
    VectorField e2 = field(r3, {Expr(), Expr::integer(1), X()});
    GroupAction broken{r3, {e1, e2}};
    CHECK_FALSE(closure_check(broken).closed());
}
