#pragma once

#include <map>
#include <vector>

#include "sds/geometry.hpp"

namespace sds {

// Linear differential operator sum_alpha c_alpha(x) d^alpha on a chart.
// Multi-indices align with the chart's coordinate order.  Coefficients are
// kept pruned: a stored coefficient is never the zero literal.
struct DiffOp {
    Chart chart;
    std::map<std::vector<int>, Expr> coef;

    static DiffOp zero(const Chart& c) { return {c, {}}; }
    static DiffOp from_field(const VectorField& v);
    static DiffOp multiplication(const Chart& c, const Expr& f); // f * Id

    int order() const;
    Expr coefficient(const std::vector<int>& alpha) const;
    void set(const std::vector<int>& alpha, const Expr& e);
    Expr apply(const Expr& f) const;
    bool is_zero() const { return coef.empty(); }

    // True when no multi-index of order 0 (or none at all) carries weight.
    bool zeroth_order_vanishes() const;

    DiffOp& operator+=(const DiffOp& o);
    friend DiffOp operator+(DiffOp a, const DiffOp& b) { a += b; return a; }
    friend DiffOp operator-(const DiffOp& a, const DiffOp& b);
    friend DiffOp operator*(const Expr& s, const DiffOp& op);
};

// Generator of a Stratonovich system: A = X0 + 1/2 sum_i Xi Xi, where the
// square is operator composition (the first-order correction term lives
// here and nowhere else).
DiffOp generator(const Sds& sds);

DiffOp compose(const DiffOp& a, const DiffOp& b);
DiffOp commutator(const DiffOp& a, const DiffOp& b);

// Coefficient-wise zero test of A - B.
ZeroVerdict diffusion_equivalent(const DiffOp& a, const DiffOp& b,
                                 const ZeroTestOptions& opts = {});

enum class IntegralMode { ByFields, ByCommutator };

// Strong first integral: every field of the system annihilates F.  The
// commutator route checks [A_X, F*Id] = 0 instead; the two agree on honest
// inputs but are computed independently.
ZeroVerdict strong_first_integral(const Sds& sds, const Expr& F,
                                  IntegralMode mode = IntegralMode::ByFields,
                                  const ZeroTestOptions& opts = {});

// Weak first integral: A_X F = 0.
ZeroVerdict weak_first_integral(const Sds& sds, const Expr& F,
                                const ZeroTestOptions& opts = {});

struct LevelSetOptions {
    int points = 8;
    int newton_iters = 60;
    int seed_tries = 60;
    double solve_tol = 1e-10;
    double tangency_tol = 1e-8;
    std::uint64_t seed = 0x1e7e15e7ULL;
};

struct LevelSetWitness {
    std::map<std::string, double> point;
    int field_index = 0;    // 0 = drift, i >= 1 = noise i
    int integral_index = 0;
    double defect = 0.0;
};

struct LevelSetReport {
    int points_found = 0;
    double max_defect = 0.0;
    std::vector<LevelSetWitness> violations;
    bool located() const { return points_found > 0; }
    bool invariant() const { return located() && violations.empty(); }
};

// Locates points on {F_j = c_j} by damped Gauss-Newton from random chart
// seeds, then checks <dF_j, X_i> = 0 there for every system field.
LevelSetReport invariant_level_set(const Sds& sds, const std::vector<Expr>& Fs,
                                   const std::vector<double>& levels,
                                   const LevelSetOptions& opts = {});

} // namespace sds
