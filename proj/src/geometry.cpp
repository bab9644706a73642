#include "sds/geometry.hpp"

#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace sds {

int Chart::index_of(const std::string& coord) const {
    for (size_t i = 0; i < coords.size(); ++i)
        if (coords[i].name == coord) return static_cast<int>(i);
    return -1;
}

std::vector<std::string> Chart::coord_names() const {
    std::vector<std::string> out;
    out.reserve(coords.size());
    for (const auto& c : coords) out.push_back(c.name);
    return out;
}

SampleDomain Chart::sample_domain() const {
    SampleDomain dom;
    for (const auto& c : coords) {
        SampleRange r;
        r.name = c.name;
        if (c.periodic) {
            double p = c.period.eval({});
            r.lo = 0.0;
            r.hi = p;
        } else if (c.lower && c.upper) {
            double inset = 0.05 * (*c.upper - *c.lower);
            r.lo = *c.lower + inset;
            r.hi = *c.upper - inset;
        } else if (c.lower) {
            r.lo = *c.lower + 0.1;
            r.hi = *c.lower + 3.0;
        } else if (c.upper) {
            r.lo = *c.upper - 3.0;
            r.hi = *c.upper - 0.1;
        } else {
            r.lo = -2.0;
            r.hi = 2.0;
        }
        dom.push_back(r);
    }
    return dom;
}

std::set<std::string> Chart::positive_coords() const {
    std::set<std::string> out;
    for (const auto& c : coords)
        if (c.lower && *c.lower >= 0.0) out.insert(c.name);
    return out;
}

bool Chart::same_as(const Chart& other) const {
    if (coords.size() != other.coords.size()) return false;
    for (size_t i = 0; i < coords.size(); ++i)
        if (coords[i].name != other.coords[i].name) return false;
    return true;
}

VectorField VectorField::zero(const Chart& c) {
    VectorField v;
    v.chart = c;
    v.comps.assign(c.coords.size(), Expr());
    return v;
}

bool VectorField::is_zero() const {
    for (const auto& c : comps)
        if (!c.is_zero_literal()) return false;
    return true;
}

Expr apply_field(const VectorField& X, const Expr& f) {
    Expr out;
    for (size_t i = 0; i < X.comps.size(); ++i) {
        if (X.comps[i].is_zero_literal()) continue;
        out += X.comps[i] * f.differentiate(X.chart.coords[i].name);
    }
    return out;
}

VectorField lie_bracket(const VectorField& X, const VectorField& Y) {
    if (!X.chart.same_as(Y.chart))
        throw std::invalid_argument("lie_bracket: fields live on different charts");
    VectorField out;
    out.chart = X.chart;
    out.comps.reserve(X.comps.size());
    for (size_t j = 0; j < X.comps.size(); ++j)
        out.comps.push_back(apply_field(X, Y.comps[j]) - apply_field(Y, X.comps[j]));
    return out;
}

ClosureReport closure_check(const GroupAction& action, int samples, std::uint64_t seed) {
    ClosureReport rep;
    const auto& gens = action.generators;
    if (gens.size() < 2) return rep;
    int n = action.chart.dim();
    int g = static_cast<int>(gens.size());

    SampleDomain dom = action.chart.sample_domain();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    for (size_t a = 0; a < gens.size(); ++a) {
        for (size_t b = a + 1; b < gens.size(); ++b) {
            VectorField br = lie_bracket(gens[a], gens[b]);
            for (int s = 0; s < samples; ++s) {
                std::map<std::string, double> pt;
                for (const auto& r : dom)
                    pt[r.name] = r.lo + (r.hi - r.lo) * unif(rng);
                Eigen::MatrixXd M(n, g);
                Eigen::VectorXd v(n);
                try {
                    for (int i = 0; i < n; ++i) {
                        for (int j = 0; j < g; ++j) M(i, j) = gens[j].comps[i].eval(pt);
                        v(i) = br.comps[i].eval(pt);
                    }
                } catch (const EvalError&) {
                    continue;
                }
                Eigen::VectorXd c = M.completeOrthogonalDecomposition().solve(v);
                double res = (M * c - v).norm();
                rep.max_residual = std::max(rep.max_residual, res);
            }
        }
    }
    return rep;
}

} // namespace sds
