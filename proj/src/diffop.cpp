#include "sds/diffop.hpp"

#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace sds {

namespace {

int abs_order(const std::vector<int>& alpha) {
    int s = 0;
    for (int a : alpha) s += a;
    return s;
}

std::int64_t binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

Expr derivative_multi(const Expr& e, const Chart& chart, const std::vector<int>& alpha) {
    Expr out = e;
    for (size_t i = 0; i < alpha.size(); ++i)
        for (int k = 0; k < alpha[i]; ++k)
            out = out.differentiate(chart.coords[i].name);
    return out;
}

} // namespace

DiffOp DiffOp::from_field(const VectorField& v) {
    DiffOp op = DiffOp::zero(v.chart);
    for (size_t i = 0; i < v.comps.size(); ++i) {
        if (v.comps[i].is_zero_literal()) continue;
        std::vector<int> alpha(v.chart.dim(), 0);
        alpha[i] = 1;
        op.coef[alpha] = v.comps[i];
    }
    return op;
}

DiffOp DiffOp::multiplication(const Chart& c, const Expr& f) {
    DiffOp op = DiffOp::zero(c);
    if (!f.is_zero_literal()) op.coef[std::vector<int>(c.dim(), 0)] = f;
    return op;
}

int DiffOp::order() const {
    int m = 0;
    for (const auto& [alpha, e] : coef) m = std::max(m, abs_order(alpha));
    return m;
}

Expr DiffOp::coefficient(const std::vector<int>& alpha) const {
    auto it = coef.find(alpha);
    return it == coef.end() ? Expr() : it->second;
}

void DiffOp::set(const std::vector<int>& alpha, const Expr& e) {
    if (e.is_zero_literal()) coef.erase(alpha);
    else coef[alpha] = e;
}

Expr DiffOp::apply(const Expr& f) const {
    Expr out;
    for (const auto& [alpha, c] : coef)
        out += c * derivative_multi(f, chart, alpha);
    return out;
}

bool DiffOp::zeroth_order_vanishes() const {
    return coef.find(std::vector<int>(chart.dim(), 0)) == coef.end();
}

DiffOp& DiffOp::operator+=(const DiffOp& o) {
    if (!chart.same_as(o.chart))
        throw std::invalid_argument("operator sum: charts differ");
    for (const auto& [alpha, e] : o.coef) set(alpha, coefficient(alpha) + e);
    return *this;
}

DiffOp operator-(const DiffOp& a, const DiffOp& b) {
    DiffOp out = a;
    out += Expr::integer(-1) * b;
    return out;
}

DiffOp operator*(const Expr& s, const DiffOp& op) {
    DiffOp out = DiffOp::zero(op.chart);
    for (const auto& [alpha, e] : op.coef) out.set(alpha, s * e);
    return out;
}

DiffOp compose(const DiffOp& a, const DiffOp& b) {
    if (!a.chart.same_as(b.chart))
        throw std::invalid_argument("compose: charts differ");
    int n = a.chart.dim();
    DiffOp out = DiffOp::zero(a.chart);
    for (const auto& [alpha, ca] : a.coef) {
        // enumerate gamma <= alpha componentwise
        std::vector<int> gamma(n, 0);
        for (;;) {
            std::int64_t mult = 1;
            for (int i = 0; i < n; ++i) mult *= binom(alpha[i], gamma[i]);
            std::vector<int> rest(n);
            for (int i = 0; i < n; ++i) rest[i] = alpha[i] - gamma[i];
            for (const auto& [beta, cb] : b.coef) {
                Expr d = derivative_multi(cb, a.chart, rest);
                if (d.is_zero_literal()) continue;
                std::vector<int> idx(n);
                for (int i = 0; i < n; ++i) idx[i] = gamma[i] + beta[i];
                out.set(idx, out.coefficient(idx) + Expr::integer(mult) * ca * d);
            }
            int i = 0;
            while (i < n && gamma[i] == alpha[i]) gamma[i++] = 0;
            if (i == n) break;
            ++gamma[i];
        }
    }
    return out;
}

DiffOp commutator(const DiffOp& a, const DiffOp& b) {
    return compose(a, b) - compose(b, a);
}

DiffOp generator(const Sds& sds) {
    DiffOp a = DiffOp::from_field(sds.drift);
    Expr half = Expr::rational(Rational(1, 2));
    for (const auto& xi : sds.noise) {
        DiffOp f = DiffOp::from_field(xi);
        a += half * compose(f, f);
    }
    return a;
}

ZeroVerdict diffusion_equivalent(const DiffOp& a, const DiffOp& b,
                                 const ZeroTestOptions& opts) {
    DiffOp d = a - b;
    SampleDomain dom = a.chart.sample_domain();
    ZeroVerdict v;
    for (const auto& [alpha, e] : d.coef)
        v = merge(v, is_zero(e, dom, opts));
    return v;
}

ZeroVerdict strong_first_integral(const Sds& sds, const Expr& F, IntegralMode mode,
                                  const ZeroTestOptions& opts) {
    SampleDomain dom = sds.chart.sample_domain();
    ZeroVerdict v;
    if (mode == IntegralMode::ByFields) {
        v = merge(v, is_zero(apply_field(sds.drift, F), dom, opts));
        for (const auto& xi : sds.noise)
            v = merge(v, is_zero(apply_field(xi, F), dom, opts));
        return v;
    }
    DiffOp c = commutator(generator(sds), DiffOp::multiplication(sds.chart, F));
    for (const auto& [alpha, e] : c.coef)
        v = merge(v, is_zero(e, dom, opts));
    return v;
}

ZeroVerdict weak_first_integral(const Sds& sds, const Expr& F,
                                const ZeroTestOptions& opts) {
    return is_zero(generator(sds).apply(F), sds.chart.sample_domain(), opts);
}

LevelSetReport invariant_level_set(const Sds& sds, const std::vector<Expr>& Fs,
                                   const std::vector<double>& levels,
                                   const LevelSetOptions& opts) {
    if (Fs.size() != levels.size())
        throw std::invalid_argument("invariant_level_set: one level per integral");
    LevelSetReport rep;
    const Chart& chart = sds.chart;
    int n = chart.dim();
    int m = static_cast<int>(Fs.size());

    std::vector<std::vector<Expr>> grads(m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i)
            grads[j].push_back(Fs[j].differentiate(chart.coords[i].name));

    SampleDomain dom = chart.sample_domain();
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto in_domain = [&](const std::map<std::string, double>& pt) {
        for (const auto& c : chart.coords) {
            double v = pt.at(c.name);
            if (c.lower && v <= *c.lower) return false;
            if (c.upper && v >= *c.upper) return false;
        }
        return true;
    };

    int tries = 0;
    while (rep.points_found < opts.points && tries < opts.seed_tries) {
        ++tries;
        std::map<std::string, double> pt;
        for (const auto& r : dom) pt[r.name] = r.lo + (r.hi - r.lo) * unif(rng);

        bool converged = false;
        for (int it = 0; it < opts.newton_iters; ++it) {
            Eigen::VectorXd res(m);
            Eigen::MatrixXd J(m, n);
            try {
                for (int j = 0; j < m; ++j) {
                    res(j) = Fs[j].eval(pt) - levels[j];
                    for (int i = 0; i < n; ++i) J(j, i) = grads[j][i].eval(pt);
                }
            } catch (const EvalError&) {
                break;
            }
            if (res.norm() <= opts.solve_tol) { converged = true; break; }
            Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(res);
            double scale = 1.0;
            if (step.norm() > 1.0) scale = 1.0 / step.norm();
            int i = 0;
            for (const auto& c : chart.coords) pt[c.name] -= scale * step(i++);
        }
        if (!converged || !in_domain(pt)) continue;
        ++rep.points_found;

        std::vector<const VectorField*> fields;
        fields.push_back(&sds.drift);
        for (const auto& xi : sds.noise) fields.push_back(&xi);
        for (size_t fi = 0; fi < fields.size(); ++fi) {
            for (int j = 0; j < m; ++j) {
                double pair = 0;
                bool ok = true;
                try {
                    for (int i = 0; i < n; ++i)
                        pair += grads[j][i].eval(pt) * fields[fi]->comps[i].eval(pt);
                } catch (const EvalError&) {
                    ok = false;
                }
                if (!ok) continue;
                rep.max_defect = std::max(rep.max_defect, std::abs(pair));
                if (std::abs(pair) > opts.tangency_tol)
                    rep.violations.push_back({pt, static_cast<int>(fi), j, pair});
            }
        }
    }
    return rep;
}

} // namespace sds
