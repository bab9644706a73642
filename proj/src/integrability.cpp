#include "sds/integrability.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sds {

namespace {

std::map<std::string, double> draw_point(const SampleDomain& dom, std::mt19937_64& rng) {
    std::map<std::string, double> pt;
    for (const auto& range : dom) {
        std::uniform_real_distribution<double> d(range.lo, range.hi);
        pt[range.name] = d(rng);
    }
    return pt;
}

int svd_rank(const Eigen::MatrixXd& m, double tol) {
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0) return 0;
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * sv(0)) ++rank;
    return rank;
}

ZeroVerdict op_vanishes(const DiffOp& a) {
    return diffusion_equivalent(a, DiffOp::zero(a.chart));
}

void validate(const IntegrableSystem& sys) {
    for (const auto& lam : sys.lambdas) {
        if (!lam.chart.same_as(sys.chart))
            throw std::invalid_argument("integrable system: operator member on a foreign chart");
        if (lam.order() > 2)
            throw std::invalid_argument("integrable system: operator member above order 2");
        if (!lam.zeroth_order_vanishes())
            throw std::invalid_argument("integrable system: operator member has a zeroth-order term");
    }
    for (const auto& z : sys.zs)
        if (!z.chart.same_as(sys.chart))
            throw std::invalid_argument("integrable system: field member on a foreign chart");
    if (sys.size() != sys.chart.dim())
        throw std::invalid_argument("integrable system: member count does not match the dimension");
}

} // namespace

DiffOp IntegrableSystem::member(int k) const {
    if (k < 0 || k >= size()) throw std::out_of_range("integrable system: member index");
    if (k < p()) return lambdas[k];
    if (k < p() + q()) return DiffOp::from_field(zs[k - p()]);
    return DiffOp::multiplication(chart, fs[k - p() - q()]);
}

CotangentPoly IntegrableSystem::symbol(int k) const {
    return principal_symbol(member(k));
}

std::string IntegrableSystem::member_label(int k) const {
    if (k < 0 || k >= size()) throw std::out_of_range("integrable system: member index");
    if (k < p()) return "lambda" + std::to_string(k + 1);
    if (k < p() + q()) return "z" + std::to_string(k - p() + 1);
    return "f" + std::to_string(k - p() - q() + 1);
}

std::string str(PointClass c) {
    switch (c) {
        case PointClass::Regular: return "regular";
        case PointClass::SemiRegular: return "semi-regular";
        case PointClass::Singular: return "singular";
    }
    return "singular";
}

bool IntegrabilityReport::commute() const {
    for (const auto& pv : commutators)
        if (!pv.verdict.ok()) return false;
    return true;
}

IntegrabilityReport verify_system(const IntegrableSystem& sys, int samples, std::uint64_t seed) {
    validate(sys);
    IntegrabilityReport rep;
    rep.expected_rank = sys.size();

    int m = sys.size();
    std::vector<DiffOp> ops;
    ops.reserve(m);
    for (int k = 0; k < m; ++k) ops.push_back(sys.member(k));
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            rep.commutators.push_back({i, j, op_vanishes(commutator(ops[i], ops[j]))});

    std::vector<CotangentPoly> symbols;
    symbols.reserve(m);
    for (int k = 0; k < m; ++k) symbols.push_back(sys.symbol(k));
    rep.independence = independence_rank(symbols, samples, seed);

    std::mt19937_64 rng(seed ^ 0xc1a551f1edULL);
    SampleDomain dom = sys.chart.sample_domain();
    int want = std::min(samples, 8);
    for (int s = 0; s < 4 * want && static_cast<int>(rep.classifications.size()) < want; ++s) {
        auto pt = draw_point(dom, rng);
        try {
            rep.classifications.push_back({pt, classify_point(sys, pt)});
        } catch (const EvalError&) {
            continue;
        }
    }
    return rep;
}

bool SdsIntegrabilityReport::pass() const {
    if (!system.pass()) return false;
    for (const auto& v : generator_commutators)
        if (!v.ok()) return false;
    return true;
}

SdsIntegrabilityReport verify_sds_integrable(const Sds& x, const IntegrableSystem& sys,
                                             int samples, std::uint64_t seed) {
    if (!x.chart.same_as(sys.chart))
        throw std::invalid_argument("verify_sds_integrable: chart mismatch");
    SdsIntegrabilityReport rep;
    rep.system = verify_system(sys, samples, seed);
    DiffOp a = generator(x);
    for (int k = 0; k < sys.size(); ++k)
        rep.generator_commutators.push_back(op_vanishes(commutator(a, sys.member(k))));
    return rep;
}

IntegrableSystem promote_to_p00(const IntegrableSystem& sys) {
    validate(sys);
    if (sys.p() == 0 && sys.q() == 0)
        throw std::invalid_argument("promote_to_p00: no operator or field to build squares from");

    Expr half = Expr::rational(Rational(1, 2));
    IntegrableSystem out;
    out.chart = sys.chart;
    out.lambdas = sys.lambdas;
    for (const auto& z : sys.zs) {
        DiffOp zop = DiffOp::from_field(z);
        out.lambdas.push_back(half * compose(zop, zop));
    }
    for (const auto& f : sys.fs) {
        if (sys.p() > 0) {
            out.lambdas.push_back((f * f) * sys.lambdas[0]);
        } else {
            VectorField fz = VectorField::zero(sys.chart);
            for (int j = 0; j < sys.chart.dim(); ++j) fz.comps[j] = f * sys.zs[0].comps[j];
            DiffOp fzop = DiffOp::from_field(fz);
            out.lambdas.push_back(half * compose(fzop, fzop));
        }
    }
    return out;
}

PointClass classify_point(const IntegrableSystem& sys, const std::map<std::string, double>& x,
                          double tol) {
    validate(sys);
    int n = sys.chart.dim();
    auto names = sys.chart.coord_names();
    int r = sys.r();

    Eigen::MatrixXd df(r, n);
    double df_scale = 1.0;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < n; ++j) df(i, j) = sys.fs[i].differentiate(names[j]).eval(x);
    if (r > 0) {
        if (svd_rank(df, tol) != r) return PointClass::Singular;
        df_scale = std::max(1.0, df.norm());
    }

    std::vector<Eigen::VectorXd> cols;
    for (const auto& lam : sys.lambdas) {
        SpanReport sp = span_at(lam, x);
        for (const auto& b : sp.basis) {
            Eigen::VectorXd v(n);
            for (int j = 0; j < n; ++j) v(j) = b[j];
            cols.push_back(std::move(v));
        }
    }
    Eigen::MatrixXd zmat(n, sys.q());
    for (int i = 0; i < sys.q(); ++i) {
        Eigen::VectorXd v(n);
        for (int j = 0; j < n; ++j) v(j) = sys.zs[i].comps[j].eval(x);
        zmat.col(i) = v;
        cols.push_back(std::move(v));
    }

    int span_dim = 0;
    if (!cols.empty()) {
        Eigen::MatrixXd s(n, static_cast<int>(cols.size()));
        for (int i = 0; i < static_cast<int>(cols.size()); ++i) s.col(i) = cols[i];
        span_dim = svd_rank(s, tol);
        if (r > 0)
            for (const auto& v : cols)
                if ((df * v).cwiseAbs().maxCoeff() > tol * df_scale * std::max(1.0, v.norm()))
                    return PointClass::Singular;
    }
    if (span_dim != sys.p() + sys.q()) return PointClass::Singular;

    if (sys.q() > 0 && svd_rank(zmat, tol) != sys.q()) return PointClass::SemiRegular;
    return PointClass::Regular;
}

TorusInvarianceReport torus_invariance_check(const DiffOp& lambda, const VectorField& z,
                                             bool attest_incommensurable) {
    const Chart& chart = lambda.chart;
    if (!z.chart.same_as(chart))
        throw std::invalid_argument("torus_invariance_check: chart mismatch");

    std::vector<std::string> angles;
    std::set<std::string> angle_set;
    for (const auto& c : chart.coords)
        if (c.periodic) {
            angles.push_back(c.name);
            angle_set.insert(c.name);
        }
    if (angles.empty())
        throw std::invalid_argument("torus_invariance_check: chart has no periodic coordinates");

    std::vector<Expr> freq;
    for (int j = 0; j < chart.dim(); ++j) {
        const Expr& comp = z.comps[j];
        if (chart.coords[j].periodic) {
            for (const auto& nm : comp.free_names())
                if (angle_set.count(nm))
                    throw std::invalid_argument(
                        "torus_invariance_check: frequency depends on the angle " + nm);
            freq.push_back(comp);
        } else if (!comp.is_zero_literal()) {
            throw std::invalid_argument("torus_invariance_check: field has a component along " +
                                        chart.coords[j].name);
        }
    }

    TorusInvarianceReport rep;
    rep.attested = attest_incommensurable;
    rep.frequencies_constant = true;
    for (const auto& a : freq)
        if (!a.free_names().empty()) rep.frequencies_constant = false;

    if (rep.frequencies_constant) {
        int p = static_cast<int>(freq.size());
        if (p > 4 && !attest_incommensurable)
            throw std::invalid_argument(
                "torus_invariance_check: relation search capped at 4 angles; attest instead");
        if (p <= 4) {
            std::vector<double> a(p);
            for (int i = 0; i < p; ++i) a[i] = freq[i].eval({});
            std::vector<int> k(p, -20);
            while (true) {
                bool nonzero = std::any_of(k.begin(), k.end(), [](int v) { return v != 0; });
                if (nonzero) {
                    double s = 0.0;
                    for (int i = 0; i < p; ++i) s += k[i] * a[i];
                    if (std::abs(s) < 1e-9) {
                        std::ostringstream os;
                        os << "torus_invariance_check: commensurable frequencies:";
                        for (int i = 0; i < p; ++i)
                            os << (i ? " + " : " ") << k[i] << "*a" << (i + 1);
                        os << " = 0";
                        throw std::invalid_argument(os.str());
                    }
                }
                int i = 0;
                while (i < p && k[i] == 20) k[i++] = -20;
                if (i == p) break;
                ++k[i];
            }
        }
    } else if (!attest_incommensurable) {
        throw std::invalid_argument(
            "torus_invariance_check: non-constant frequencies require attestation");
    }

    rep.commutation = op_vanishes(commutator(DiffOp::from_field(z), lambda));
    rep.applicable = rep.commutation.ok();
    if (!rep.applicable) return rep;

    SampleDomain dom = chart.sample_domain();
    for (const auto& [alpha, c] : lambda.coef)
        for (const auto& th : angles) {
            ZeroVerdict v = is_zero(c.differentiate(th), dom);
            if (!v.ok()) rep.violations.push_back({alpha, th, v});
        }
    return rep;
}

Sds normal_form(const Sds& x, const std::map<std::string, double>& section) {
    const Chart& chart = x.chart;
    std::set<std::string> angle_set;
    for (const auto& c : chart.coords)
        if (c.periodic) angle_set.insert(c.name);
    if (angle_set.empty())
        throw std::invalid_argument("normal_form: chart has no periodic coordinates");
    for (const auto& nm : angle_set)
        if (!section.count(nm))
            throw std::invalid_argument("normal_form: section misses the angle " + nm);
    for (const auto& [nm, v] : section) {
        (void)v;
        if (!angle_set.count(nm))
            throw std::invalid_argument("normal_form: section assigns the non-periodic " + nm);
    }

    DiffOp a = generator(x);
    SampleDomain dom = chart.sample_domain();
    for (const auto& [alpha, c] : a.coef) {
        (void)alpha;
        for (const auto& th : angle_set)
            if (!is_zero(c.differentiate(th), dom).ok())
                throw std::invalid_argument("normal_form: generator coefficient depends on " + th);
    }

    std::map<std::string, Expr> freeze;
    for (const auto& [nm, v] : section) {
        double nearest = std::nearbyint(v);
        freeze[nm] = (v == nearest) ? Expr::integer(static_cast<std::int64_t>(nearest))
                                    : Expr::floating(v);
    }

    Sds out;
    out.chart = chart;
    for (const auto& xi : x.noise) {
        VectorField y = VectorField::zero(chart);
        for (int j = 0; j < chart.dim(); ++j) y.comps[j] = xi.comps[j].substitute(freeze);
        out.noise.push_back(std::move(y));
    }

    Expr half = Expr::rational(Rational(1, 2));
    DiffOp correction = DiffOp::zero(chart);
    for (const auto& y : out.noise) {
        DiffOp f = DiffOp::from_field(y);
        correction += half * compose(f, f);
    }
    DiffOp drift_op = a - correction;
    if (drift_op.order() > 1 || !drift_op.zeroth_order_vanishes())
        throw std::logic_error("normal_form: frozen fields fail to reproduce the diffusion");

    auto positive = chart.positive_coords();
    out.drift = VectorField::zero(chart);
    for (int j = 0; j < chart.dim(); ++j) {
        std::vector<int> alpha(chart.dim(), 0);
        alpha[j] = 1;
        out.drift.comps[j] = drift_op.coefficient(alpha).assume_positive(positive);
    }

    if (!diffusion_equivalent(generator(out), a).ok())
        throw std::logic_error("normal_form: output generator drifted from the input");
    return out;
}

} // namespace sds
