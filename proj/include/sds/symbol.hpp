#pragma once

#include <map>
#include <vector>

#include "sds/diffop.hpp"

namespace sds {

// Polynomial in the momentum variables of a chart's cotangent bundle, with
// scalar-expression coefficients.  Momentum multi-indices align with the
// chart's coordinate order; the momentum dual to coordinate q is reported
// to callers as p_q.  Stored coefficients are never the zero literal.
struct CotangentPoly {
    Chart chart;
    std::map<std::vector<int>, Expr> coef;

    static CotangentPoly zero(const Chart& c) { return {c, {}}; }

    int degree() const;
    Expr coefficient(const std::vector<int>& alpha) const;
    void set(const std::vector<int>& alpha, const Expr& e);
    bool is_zero() const { return coef.empty(); }

    // Point evaluation; momenta are looked up under the key "p_<coord>".
    double eval(const std::map<std::string, double>& xp) const;

    CotangentPoly dp(int j) const;  // d/dp_j
    CotangentPoly dx(int j) const;  // d/dx_j (coefficient-wise)

    CotangentPoly& operator+=(const CotangentPoly& o);
    friend CotangentPoly operator+(CotangentPoly a, const CotangentPoly& b) { a += b; return a; }
    friend CotangentPoly operator-(const CotangentPoly& a, const CotangentPoly& b);
    friend CotangentPoly operator*(const CotangentPoly& a, const CotangentPoly& b);
    friend CotangentPoly operator*(const Expr& s, const CotangentPoly& p);

    std::string str() const;
};

// Top-order part of the operator as a function on the cotangent bundle.
CotangentPoly principal_symbol(const DiffOp& a);

// {P, Q} = sum_j dP/dp_j dQ/dx_j - dP/dx_j dQ/dp_j (canonical structure).
CotangentPoly poisson_bracket(const CotangentPoly& p, const CotangentPoly& q);

struct RankReport {
    int rank = 0;
    int samples_used = 0;
    std::map<std::string, double> witness;  // cotangent point achieving rank
    std::vector<double> singular_values;    // at the witness
};

// Numeric rank of the Jacobian of the symbol functions with respect to all
// chart and momentum variables, maximized over random cotangent points.
// Singular values below 1e-8 * sigma_max count as zero.
RankReport independence_rank(const std::vector<CotangentPoly>& symbols,
                             int samples = 32, std::uint64_t seed = 0x5bea7ULL);

// Rank of the degree-2 parts as quadratic forms in the momenta at a fixed
// base point: the forms are flattened and stacked, then ranked like above.
// This is the fiberwise notion; independence_rank is the global one.
int quadratic_rank_at(const std::vector<CotangentPoly>& symbols,
                      const std::map<std::string, double>& x);

struct SpanReport {
    int dimension = 0;
    std::vector<std::vector<double>> basis;  // orthonormal, spans the range
};

// Range of the symmetric order-2 coefficient matrix a^{jk}(x).  For a
// generator this is the span of the noise fields at x, but the computation
// never sees the fields, only the operator.
SpanReport span_at(const DiffOp& a, const std::map<std::string, double>& x);

// True iff the weighted sum of order-2 coefficient matrices is positive
// definite at x (Cholesky with absolute pivot floor 1e-12).
bool ellipticity_check(const std::vector<DiffOp>& ops,
                       const std::vector<double>& weights,
                       const std::map<std::string, double>& x);

struct MetricReport {
    std::vector<std::vector<Expr>> metric;  // g_jk, inverse of twice the order-2 matrix
    Expr volume;                            // sqrt(det g)
    VectorField drift;                      // first-order remainder V
};

// Splits an elliptic order-2 operator as half the Laplace-Beltrami operator
// of g plus a drift: A = 1/2 Delta_g + V with g = (2a)^{-1}.  Under this
// normalization Brownian motion yields the Euclidean metric.  Throws when
// the coefficient matrix is symbolically singular, fails positive
// definiteness on the chart's sampling box, or A has a zeroth-order term.
MetricReport metric_from_elliptic(const DiffOp& a);

} // namespace sds
