#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sds/expr.hpp"

namespace sds {

// One coordinate of a chart.  Periodic coordinates wrap modulo a period
// expression (evaluated numerically when sampling); bounded coordinates carry
// open constraints like r > 0 that drive sampling boxes and trajectory
// truncation.
struct CoordSpec {
    std::string name;
    bool periodic = false;
    Expr period;
    std::optional<double> lower;
    std::optional<double> upper;

    CoordSpec() = default;
    CoordSpec(std::string n) : name(std::move(n)) {}
};

struct Chart {
    std::string name;
    std::vector<CoordSpec> coords;

    int dim() const { return static_cast<int>(coords.size()); }
    int index_of(const std::string& coord) const;
    std::vector<std::string> coord_names() const;
    bool has_coord(const std::string& coord) const { return index_of(coord) >= 0; }

    // Sampling box: unconstrained coordinates draw from [-2, 2], periodic
    // ones from [0, period), lower-bounded ones from (lower, lower + 3] with
    // a 0.1 inset.
    SampleDomain sample_domain() const;

    // Coordinates constrained to be positive; used for sqrt extraction.
    std::set<std::string> positive_coords() const;

    bool same_as(const Chart& other) const;
};

struct ScalarField {
    Chart chart;
    Expr value;
};

struct VectorField {
    Chart chart;
    std::vector<Expr> comps; // aligned with chart.coords

    static VectorField zero(const Chart& c);
    bool is_zero() const;
};

// X(f) = sum_i X^i df/dx_i
Expr apply_field(const VectorField& X, const Expr& f);

// [X, Y]^j = X(Y^j) - Y(X^j); both fields must share a chart.
VectorField lie_bracket(const VectorField& X, const VectorField& Y);

// Stratonovich system dx = X0 dt + sum_i Xi o dB^i; k = 0 is deterministic.
struct Sds {
    Chart chart;
    VectorField drift;
    std::vector<VectorField> noise;
};

struct GroupAction {
    Chart chart;
    std::vector<VectorField> generators;
};

// Bracket-closure diagnostic: for every generator pair, the bracket is
// decomposed against the span of the generators at sample points and the
// worst least-squares residual is recorded.  Advisory only.
struct ClosureReport {
    double max_residual = 0.0;
    bool closed(double tol = 1e-8) const { return max_residual <= tol; }
};

ClosureReport closure_check(const GroupAction& action, int samples = 16,
                            std::uint64_t seed = 0x5eedac710ULL);

} // namespace sds
