#include "sds/reduction.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace sds {

namespace {

std::map<std::string, double> to_point(const Chart& c, const Eigen::VectorXd& v) {
    std::map<std::string, double> pt;
    for (int i = 0; i < c.dim(); ++i) pt[c.coords[i].name] = v(i);
    return pt;
}

Eigen::VectorXd to_vector(const Chart& c, const std::map<std::string, double>& pt) {
    Eigen::VectorXd v(c.dim());
    for (int i = 0; i < c.dim(); ++i) v(i) = pt.at(c.coords[i].name);
    return v;
}

// Jacobian rows follow the target components, columns the source coords.
class MapJacobian {
public:
    explicit MapJacobian(const QuotientMap& phi) : phi_(phi) {
        for (const auto& comp : phi.components) {
            std::vector<Expr> row;
            for (const auto& c : phi.source.coords)
                row.push_back(comp.differentiate(c.name));
            rows_.push_back(std::move(row));
        }
    }

    Eigen::MatrixXd at(const std::map<std::string, double>& pt) const {
        Eigen::MatrixXd j(rows_.size(), phi_.source.dim());
        for (size_t r = 0; r < rows_.size(); ++r)
            for (int c = 0; c < phi_.source.dim(); ++c)
                j(static_cast<int>(r), c) = rows_[r][c].eval(pt);
        return j;
    }

private:
    const QuotientMap& phi_;
    std::vector<std::vector<Expr>> rows_;
};

Eigen::VectorXd phi_values(const QuotientMap& phi, const std::map<std::string, double>& pt) {
    Eigen::VectorXd v(phi.target.dim());
    for (int j = 0; j < phi.target.dim(); ++j) v(j) = phi.components[j].eval(pt);
    return v;
}

int numeric_rank(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int r = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s(i) > 1e-8 * s(0)) ++r;
    return r;
}

std::map<std::string, double> sample_point(const SampleDomain& dom, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::map<std::string, double> pt;
    for (const auto& r : dom) pt[r.name] = r.lo + (r.hi - r.lo) * unif(rng);
    return pt;
}

bool inside(const Chart& c, const std::map<std::string, double>& pt) {
    for (const auto& spec : c.coords) {
        double v = pt.at(spec.name);
        if (spec.lower && v <= *spec.lower + 1e-6) return false;
        if (spec.upper && v >= *spec.upper - 1e-6) return false;
    }
    return true;
}

// Walks along a fiber of phi: random tangent steps projected onto the
// kernel of the differential, each followed by a Newton correction back to
// the fiber.  Returns a second point with equal Phi-value (within 1e-10)
// and visible separation from the start, or nothing.
std::optional<std::map<std::string, double>> fiber_partner(
    const QuotientMap& phi, const MapJacobian& jac,
    const std::map<std::string, double>& x0, std::mt19937_64& rng, int budget = 200) {
    const Chart& src = phi.source;
    int n = src.dim();
    Eigen::VectorXd target;
    try {
        target = phi_values(phi, x0);
    } catch (const EvalError&) {
        return std::nullopt;
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd y = to_vector(src, x0);
    double best_sep = 0.0;
    Eigen::VectorXd best = y;

    for (int step = 0; step < budget; ++step) {
        Eigen::MatrixXd j;
        try {
            j = jac.at(to_point(src, y));
        } catch (const EvalError&) {
            break;
        }
        Eigen::VectorXd d(n);
        for (int i = 0; i < n; ++i) d(i) = gauss(rng);
        // remove the component seen by the differential
        Eigen::VectorXd proj = j.completeOrthogonalDecomposition().solve(j * d);
        d -= proj;
        if (d.norm() < 1e-9) continue;
        Eigen::VectorXd cand = y + 0.15 * d / d.norm();

        // pull back onto the fiber
        bool corrected = false;
        for (int it = 0; it < 12; ++it) {
            std::map<std::string, double> pt = to_point(src, cand);
            Eigen::VectorXd res;
            Eigen::MatrixXd jc;
            try {
                res = phi_values(phi, pt) - target;
                jc = jac.at(pt);
            } catch (const EvalError&) {
                break;
            }
            if (res.lpNorm<Eigen::Infinity>() <= 1e-12) { corrected = true; break; }
            cand -= jc.completeOrthogonalDecomposition().solve(res);
        }
        if (!corrected || !inside(src, to_point(src, cand))) continue;
        y = cand;
        double sep = (y - to_vector(src, x0)).norm();
        if (sep > best_sep) { best_sep = sep; best = y; }
    }
    if (best_sep < 0.05) return std::nullopt;
    std::map<std::string, double> out = to_point(src, best);
    try {
        if ((phi_values(phi, out) - target).lpNorm<Eigen::Infinity>() > 1e-10)
            return std::nullopt;
    } catch (const EvalError&) {
        return std::nullopt;
    }
    return out;
}

// Carre-du-champ data of a generator-shaped operator through the map:
// first-order coefficients A(Phi^j), second-order ones from the squared
// form, already arranged as target multi-indices.
std::map<std::vector<int>, Expr> projected_coefficients(const DiffOp& a, const QuotientMap& phi) {
    int m = phi.target.dim();
    std::vector<Expr> b(m);
    for (int j = 0; j < m; ++j) b[j] = a.apply(phi.components[j]);

    std::map<std::vector<int>, Expr> out;
    for (int j = 0; j < m; ++j) {
        std::vector<int> alpha(m, 0);
        alpha[j] = 1;
        if (!b[j].is_zero_literal()) out[alpha] = b[j];
    }
    Expr half = Expr::rational(Rational(1, 2));
    for (int j = 0; j < m; ++j)
        for (int k = j; k < m; ++k) {
            Expr gamma = a.apply(phi.components[j] * phi.components[k]) -
                         phi.components[j] * b[k] - phi.components[k] * b[j];
            Expr coefficient = (j == k) ? half * gamma : gamma;
            if (coefficient.is_zero_literal()) continue;
            std::vector<int> alpha(m, 0);
            alpha[j] += 1;
            alpha[k] += 1;
            out[alpha] = coefficient;
        }
    return out;
}

std::string index_label(const Chart& target, const std::vector<int>& alpha) {
    std::ostringstream os;
    os << "coefficient of";
    bool any = false;
    for (size_t j = 0; j < alpha.size(); ++j)
        for (int k = 0; k < alpha[j]; ++k) {
            os << " d/d" << target.coords[j].name;
            any = true;
        }
    if (!any) os << " identity";
    return os.str();
}

VectorField unit_field(const Chart& c, int i) {
    VectorField v = VectorField::zero(c);
    v.comps[i] = Expr::integer(1);
    return v;
}

} // namespace

std::map<std::string, double> QuotientMap::forward(const std::map<std::string, double>& x) const {
    std::map<std::string, double> u;
    for (int j = 0; j < target.dim(); ++j)
        u[target.coords[j].name] = components[j].eval(x);
    return u;
}

std::map<std::string, double> QuotientMap::section_point(const std::map<std::string, double>& u) const {
    if (!has_section()) throw std::logic_error("quotient map has no section");
    std::map<std::string, double> x;
    for (int i = 0; i < source.dim(); ++i)
        x[source.coords[i].name] = section[i].eval(u);
    return x;
}

SubmersionReport submersion_check(const QuotientMap& phi, int samples, std::uint64_t seed) {
    SubmersionReport rep;
    rep.min_rank = phi.target.dim();
    MapJacobian jac(phi);
    SampleDomain dom = phi.source.sample_domain();
    std::mt19937_64 rng(seed);
    bool first = true;
    for (int s = 0; s < samples; ++s) {
        std::map<std::string, double> pt = sample_point(dom, rng);
        int r;
        try {
            r = numeric_rank(jac.at(pt));
        } catch (const EvalError&) {
            continue;
        }
        ++rep.samples_used;
        if (first || r < rep.min_rank) {
            rep.min_rank = r;
            rep.witness = pt;
            first = false;
        }
    }
    rep.full_rank = rep.samples_used > 0 && rep.min_rank == phi.target.dim();
    return rep;
}

bool InvarianceReport::ok() const {
    for (const auto& row : verdicts)
        for (const auto& v : row)
            if (!v.ok()) return false;
    return true;
}

bool InvarianceReport::symbolic() const {
    for (const auto& row : verdicts)
        for (const auto& v : row)
            if (!v.symbolic()) return false;
    return true;
}

InvarianceReport strict_invariance(const Sds& x, const GroupAction& g,
                                   const ZeroTestOptions& opts) {
    if (!x.chart.same_as(g.chart))
        throw std::invalid_argument("strict_invariance: charts differ");
    SampleDomain dom = x.chart.sample_domain();
    std::vector<const VectorField*> fields;
    fields.push_back(&x.drift);
    for (const auto& xi : x.noise) fields.push_back(&xi);

    InvarianceReport rep;
    for (const auto& v : g.generators) {
        std::vector<ZeroVerdict> row;
        for (const auto* f : fields) {
            VectorField br = lie_bracket(v, *f);
            ZeroVerdict merged;
            for (const auto& comp : br.comps)
                merged = merge(merged, is_zero(comp, dom, opts));
            row.push_back(merged);
        }
        rep.verdicts.push_back(std::move(row));
    }
    return rep;
}

bool DiffusionInvarianceReport::ok() const {
    for (const auto& v : verdicts)
        if (!v.ok()) return false;
    return true;
}

bool DiffusionInvarianceReport::symbolic() const {
    for (const auto& v : verdicts)
        if (!v.symbolic()) return false;
    return true;
}

DiffusionInvarianceReport diffusion_invariance(const Sds& x, const GroupAction& g,
                                               const ZeroTestOptions& opts) {
    if (!x.chart.same_as(g.chart))
        throw std::invalid_argument("diffusion_invariance: charts differ");
    DiffOp a = generator(x);
    SampleDomain dom = x.chart.sample_domain();
    DiffusionInvarianceReport rep;
    for (const auto& v : g.generators) {
        DiffOp c = commutator(DiffOp::from_field(v), a);
        ZeroVerdict merged;
        for (const auto& [alpha, e] : c.coef)
            merged = merge(merged, is_zero(e, dom, opts));
        rep.verdicts.push_back(merged);
    }
    return rep;
}

ProjectionReport project_generator(const DiffOp& a, const QuotientMap& phi,
                                   int samples, const ZeroTestOptions& opts) {
    if (!a.chart.same_as(phi.source))
        throw std::invalid_argument("project_generator: operator lives off the source chart");
    if (a.order() > 2 || !a.zeroth_order_vanishes())
        throw std::invalid_argument("project_generator: operator is not generator-shaped");

    ProjectionReport rep;
    rep.reduced = DiffOp::zero(phi.target);
    std::map<std::vector<int>, Expr> cand = projected_coefficients(a, phi);
    SampleDomain src_dom = phi.source.sample_domain();
    auto target_positive = phi.target.positive_coords();

    if (phi.has_section()) {
        std::map<std::string, Expr> down;
        for (int i = 0; i < phi.source.dim(); ++i)
            down[phi.source.coords[i].name] = phi.section[i];
        std::map<std::string, Expr> up;
        for (int j = 0; j < phi.target.dim(); ++j)
            up[phi.target.coords[j].name] = phi.components[j];

        rep.ok = true;
        rep.symbolic_form = true;
        for (const auto& [alpha, c] : cand) {
            Expr rewritten = c.substitute(down).assume_positive(target_positive);
            Expr residual = rewritten.substitute(up) - c;
            ZeroVerdict v = is_zero(residual, src_dom, opts);
            rep.rewrite = merge(rep.rewrite, v);
            if (!v.ok()) {
                rep.ok = false;
                FiberPair fp;
                fp.quantity = index_label(phi.target, alpha);
                if (v.witness) {
                    fp.x = *v.witness;
                    // the zero test only reports coordinates the residual
                    // mentions; complete the point from the sampling box
                    for (const auto& range : src_dom)
                        if (!fp.x.count(range.name))
                            fp.x[range.name] = 0.5 * (range.lo + range.hi);
                    try {
                        fp.y = phi.section_point(phi.forward(fp.x));
                        fp.separation = std::abs(c.eval(fp.x) - c.eval(fp.y));
                    } catch (const EvalError&) {
                        fp.separation = v.witness_residual;
                    }
                }
                rep.witnesses.push_back(std::move(fp));
                continue;
            }
            rep.reduced.set(alpha, rewritten);
        }
        if (!rep.ok) rep.reduced = DiffOp::zero(phi.target);
        return rep;
    }

    // no section: numeric fiber-constancy of every candidate coefficient
    MapJacobian jac(phi);
    std::mt19937_64 rng(opts.seed);
    rep.ok = true;
    int pairs = 0;
    for (int s = 0; s < 8 * samples && pairs < samples; ++s) {
        std::map<std::string, double> x0 = sample_point(src_dom, rng);
        int rank;
        try {
            rank = numeric_rank(jac.at(x0));
        } catch (const EvalError&) {
            continue;
        }
        if (rank >= phi.source.dim()) { ++pairs; continue; }  // point fibers
        auto partner = fiber_partner(phi, jac, x0, rng);
        if (!partner) continue;
        ++pairs;
        for (const auto& [alpha, c] : cand) {
            double va, vb;
            try {
                va = c.eval(x0);
                vb = c.eval(*partner);
            } catch (const EvalError&) {
                continue;
            }
            double defect = std::abs(va - vb);
            if (defect > 1e-6 * (1.0 + std::abs(va) + std::abs(vb))) {
                rep.ok = false;
                FiberPair fp;
                fp.x = x0;
                fp.y = *partner;
                fp.separation = defect;
                fp.quantity = index_label(phi.target, alpha);
                rep.witnesses.push_back(std::move(fp));
            }
        }
    }
    if (pairs == 0) rep.ok = false;
    return rep;
}

Sds realize_sds(const DiffOp& a) {
    const Chart& chart = a.chart;
    int n = chart.dim();
    if (a.order() > 2)
        throw std::invalid_argument("realize_sds: order exceeds 2");
    if (!a.zeroth_order_vanishes())
        throw std::invalid_argument("realize_sds: zeroth-order term present");

    auto positive = chart.positive_coords();
    std::vector<std::vector<Expr>> twoa(n, std::vector<Expr>(n));
    for (int j = 0; j < n; ++j) {
        std::vector<int> alpha(n, 0);
        alpha[j] = 2;
        twoa[j][j] = Expr::integer(2) * a.coefficient(alpha);
    }
    bool diagonal = true;
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            std::vector<int> alpha(n, 0);
            alpha[j] = alpha[k] = 1;
            twoa[j][k] = twoa[k][j] = a.coefficient(alpha);
            if (!twoa[j][k].is_zero_literal()) diagonal = false;
        }

    // semidefiniteness over the sampling box
    {
        SampleDomain dom = chart.sample_domain();
        std::mt19937_64 rng(0x2ea112eULL);
        int valid = 0;
        for (int s = 0; s < 16; ++s) {
            std::map<std::string, double> pt = sample_point(dom, rng);
            Eigen::MatrixXd m(n, n);
            try {
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) m(j, k) = twoa[j][k].eval(pt);
            } catch (const EvalError&) {
                continue;
            }
            ++valid;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
            if (es.eigenvalues().minCoeff() < -1e-9)
                throw std::invalid_argument("realize_sds: diffusion matrix indefinite");
        }
        if (valid == 0)
            throw std::invalid_argument("realize_sds: diffusion matrix unsampleable");
    }

    std::vector<VectorField> noise;
    if (diagonal) {
        for (int j = 0; j < n; ++j) {
            if (twoa[j][j].is_zero_literal()) continue;
            VectorField y = VectorField::zero(chart);
            y.comps[j] = sqrt(twoa[j][j]).assume_positive(positive);
            noise.push_back(std::move(y));
        }
    } else {
        // symbolic Cholesky; zero pivots are allowed only on zero columns
        std::vector<std::vector<Expr>> l(n, std::vector<Expr>(n));
        for (int k = 0; k < n; ++k) {
            Expr pivot = twoa[k][k];
            for (int j = 0; j < k; ++j) pivot -= l[k][j] * l[k][j];
            pivot = pivot.assume_positive(positive);
            if (pivot.is_zero_literal()) {
                for (int i = k + 1; i < n; ++i) {
                    Expr rest = twoa[i][k];
                    for (int j = 0; j < k; ++j) rest -= l[i][j] * l[k][j];
                    if (!rest.is_zero_literal())
                        throw std::invalid_argument("realize_sds: no symbolic square root found");
                }
                continue;
            }
            l[k][k] = sqrt(pivot).assume_positive(positive);
            Expr inv = (Expr::integer(1) / l[k][k]).assume_positive(positive);
            for (int i = k + 1; i < n; ++i) {
                Expr rest = twoa[i][k];
                for (int j = 0; j < k; ++j) rest -= l[i][j] * l[k][j];
                l[i][k] = (rest * inv).assume_positive(positive);
            }
        }
        for (int k = 0; k < n; ++k) {
            VectorField y = VectorField::zero(chart);
            bool nonzero = false;
            for (int i = 0; i < n; ++i) {
                y.comps[i] = l[i][k];
                if (!l[i][k].is_zero_literal()) nonzero = true;
            }
            if (nonzero) noise.push_back(std::move(y));
        }
    }

    DiffOp correction = DiffOp::zero(chart);
    Expr half = Expr::rational(Rational(1, 2));
    for (const auto& y : noise) {
        DiffOp f = DiffOp::from_field(y);
        correction += half * compose(f, f);
    }
    DiffOp drift_op = a - correction;
    if (drift_op.order() > 1 || !drift_op.zeroth_order_vanishes())
        throw std::logic_error("realize_sds: square root failed to reproduce the diffusion");

    Sds out;
    out.chart = chart;
    out.drift = VectorField::zero(chart);
    for (int i = 0; i < n; ++i) {
        std::vector<int> alpha(n, 0);
        alpha[i] = 1;
        out.drift.comps[i] = drift_op.coefficient(alpha).assume_positive(positive);
    }
    out.noise = std::move(noise);
    return out;
}

ProjectabilityReport projectability_check(const Sds& x, const QuotientMap& phi,
                                          ProjectabilityMode mode, int samples) {
    ProjectabilityReport rep;
    rep.mode = mode;
    if (!x.chart.same_as(phi.source))
        throw std::invalid_argument("projectability_check: charts differ");
    if (mode == ProjectabilityMode::Deterministic && !x.noise.empty())
        throw std::invalid_argument("projectability_check: deterministic mode needs a noiseless system");

    if (mode == ProjectabilityMode::Diffusion) {
        ProjectionReport pr = project_generator(generator(x), phi, samples);
        rep.pass = pr.ok;
        rep.pairs_tested = samples;
        if (!pr.witnesses.empty()) {
            rep.witness = pr.witnesses.front();
            rep.max_defect = pr.witnesses.front().separation;
        }
        return rep;
    }

    std::vector<const VectorField*> fields;
    fields.push_back(&x.drift);
    if (mode == ProjectabilityMode::Strict)
        for (const auto& xi : x.noise) fields.push_back(&xi);

    MapJacobian jac(phi);
    SampleDomain dom = phi.source.sample_domain();
    std::mt19937_64 rng(0xf1be25ULL);
    rep.pass = true;

    auto push = [&](const VectorField& f, const std::map<std::string, double>& pt) {
        Eigen::VectorXd v(phi.source.dim());
        for (int i = 0; i < phi.source.dim(); ++i) v(i) = f.comps[i].eval(pt);
        return Eigen::VectorXd(jac.at(pt) * v);
    };

    int attempts = 0;
    while (rep.pairs_tested < samples && attempts < 8 * samples) {
        ++attempts;
        std::map<std::string, double> x0 = sample_point(dom, rng);
        int rank;
        try {
            rank = numeric_rank(jac.at(x0));
        } catch (const EvalError&) {
            continue;
        }
        if (rank >= phi.source.dim()) { ++rep.pairs_tested; continue; }  // point fibers
        auto partner = fiber_partner(phi, jac, x0, rng);
        if (!partner) continue;
        ++rep.pairs_tested;
        for (size_t fi = 0; fi < fields.size(); ++fi) {
            Eigen::VectorXd pa, pb;
            try {
                pa = push(*fields[fi], x0);
                pb = push(*fields[fi], *partner);
            } catch (const EvalError&) {
                continue;
            }
            double defect = (pa - pb).lpNorm<Eigen::Infinity>();
            rep.max_defect = std::max(rep.max_defect, defect);
            if (defect > 1e-6 * (1.0 + pa.norm() + pb.norm())) {
                rep.pass = false;
                if (!rep.witness) {
                    FiberPair fp;
                    fp.x = x0;
                    fp.y = *partner;
                    fp.separation = defect;
                    fp.quantity = fi == 0 ? "drift pushforward"
                                          : "noise " + std::to_string(fi) + " pushforward";
                    rep.witness = std::move(fp);
                }
            }
        }
    }
    if (rep.pairs_tested == 0) rep.pass = false;
    return rep;
}

RadialAngularSplit radial_angular_decompose(const Sds& x, const ZeroTestOptions& opts) {
    const Chart& chart = x.chart;
    if (chart.dim() != 2 || !chart.coords[0].periodic || chart.coords[1].periodic)
        throw std::invalid_argument("radial_angular_decompose: chart must be (periodic, bounded)");

    DiffOp a = generator(x);
    SampleDomain dom = chart.sample_domain();
    const std::string& angle = chart.coords[0].name;

    for (const auto& [alpha, c] : a.coef) {
        ZeroVerdict v = is_zero(c.differentiate(angle), dom, opts);
        if (!v.ok())
            throw std::invalid_argument("radial_angular_decompose: generator depends on the angle");
    }
    ZeroVerdict mixed = is_zero(a.coefficient({1, 1}), dom, opts);
    if (!mixed.ok())
        throw std::invalid_argument("radial_angular_decompose: mixed diffusion term obstructs the split");

    DiffOp angular_op = DiffOp::zero(chart);
    DiffOp radial_op = DiffOp::zero(chart);
    for (const auto& [alpha, c] : a.coef) {
        if (alpha[0] > 0 && alpha[1] > 0) continue;  // zero-tested above
        if (alpha[0] > 0) angular_op.set(alpha, c);
        else radial_op.set(alpha, c);
    }

    RadialAngularSplit split;
    split.angular = realize_sds(angular_op);
    split.radial = realize_sds(radial_op);
    return split;
}

Chart euclidean_chart(int n) {
    if (n < 1) throw std::invalid_argument("euclidean_chart: n < 1");
    Chart c;
    c.name = "r" + std::to_string(n);
    for (int i = 0; i < n; ++i) c.coords.push_back({"x" + std::to_string(i + 1)});
    return c;
}

Chart plane_chart() {
    Chart c;
    c.name = "plane";
    c.coords = {{"x"}, {"y"}};
    return c;
}

Chart half_line_chart(const std::string& coord) {
    Chart c;
    c.name = "half_line_" + coord;
    CoordSpec spec;
    spec.name = coord;
    spec.lower = 0.0;
    c.coords = {spec};
    return c;
}

Chart polar_chart() {
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

Chart torus_chart(int n) {
    if (n < 1) throw std::invalid_argument("torus_chart: n < 1");
    Chart c;
    c.name = "t" + std::to_string(n);
    for (int i = 0; i < n; ++i) {
        CoordSpec spec;
        spec.name = "theta" + std::to_string(i + 1);
        spec.periodic = true;
        spec.period = Expr::integer(1);
        c.coords.push_back(spec);
    }
    return c;
}

Sds brownian(int n) {
    Chart c = euclidean_chart(n);
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    for (int i = 0; i < n; ++i) s.noise.push_back(unit_field(c, i));
    return s;
}

GroupAction translation_action(int n) {
    Chart c = euclidean_chart(n);
    GroupAction g;
    g.chart = c;
    for (int i = 0; i < n; ++i) g.generators.push_back(unit_field(c, i));
    return g;
}

GroupAction so_n_action(int n) {
    Chart c = euclidean_chart(n);
    GroupAction g;
    g.chart = c;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            VectorField v = VectorField::zero(c);
            v.comps[i] = Expr::integer(-1) * Expr::symbol(c.coords[j].name);
            v.comps[j] = Expr::symbol(c.coords[i].name);
            g.generators.push_back(std::move(v));
        }
    return g;
}

Sds bessel(int n) {
    if (n < 1) throw std::invalid_argument("bessel: n < 1");
    Chart c = half_line_chart("r");
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[0] = Expr::rational(Rational(n - 1, 2)) / Expr::symbol("r");
    s.noise.push_back(unit_field(c, 0));
    return s;
}

namespace {

Expr compose_radius(const Expr& f_of_r, const Expr& radius) {
    std::map<std::string, Expr> sub;
    sub["r"] = radius;
    return f_of_r.substitute(sub);
}

} // namespace

Sds damped_oscillator(const Expr& f_of_r) {
    Chart c = plane_chart();
    Expr x = Expr::symbol("x"), y = Expr::symbol("y");
    Expr f = compose_radius(f_of_r, sqrt(x * x + y * y));
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[0] = Expr::integer(-1) * y - f * x;
    s.drift.comps[1] = x - f * y;
    s.noise.push_back(unit_field(c, 0));
    s.noise.push_back(unit_field(c, 1));
    return s;
}

Sds damped_oscillator_polar(const Expr& f_of_r) {
    Chart c = polar_chart();
    Expr r = Expr::symbol("r"), th = Expr::symbol("theta");
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[0] = Expr::integer(1);
    s.drift.comps[1] = Expr::integer(-1) * r * f_of_r;

    // the Cartesian unit noise written in (theta, r)
    VectorField ex = VectorField::zero(c);
    ex.comps[0] = Expr::integer(-1) * sin(th) / r;
    ex.comps[1] = cos(th);
    VectorField ey = VectorField::zero(c);
    ey.comps[0] = cos(th) / r;
    ey.comps[1] = sin(th);
    s.noise = {ex, ey};
    return s;
}

Sds brownian_polar() {
    Sds s = damped_oscillator_polar(Expr());
    s.drift = VectorField::zero(s.chart);
    return s;
}

Sds harmonic_hamiltonian(int n) {
    if (n < 1) throw std::invalid_argument("harmonic_hamiltonian: n < 1");
    Chart c;
    c.name = "r" + std::to_string(2 * n) + "_symplectic";
    for (int i = 0; i < n; ++i) c.coords.push_back({"x" + std::to_string(i + 1)});
    for (int i = 0; i < n; ++i) c.coords.push_back({"y" + std::to_string(i + 1)});
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    for (int i = 0; i < n; ++i) {
        s.drift.comps[i] = Expr::integer(-1) * Expr::symbol(c.coords[n + i].name);
        s.drift.comps[n + i] = Expr::symbol(c.coords[i].name);
    }
    for (int i = 0; i < 2 * n; ++i) s.noise.push_back(unit_field(c, i));
    return s;
}

QuotientMap radius_map(int n) {
    QuotientMap phi;
    phi.source = euclidean_chart(n);
    phi.target = half_line_chart("r");
    Expr sum;
    for (int i = 0; i < n; ++i) {
        Expr xi = Expr::symbol(phi.source.coords[i].name);
        sum += xi * xi;
    }
    phi.components = {sqrt(sum)};
    phi.section.assign(n, Expr());
    phi.section[0] = Expr::symbol("r");
    return phi;
}

QuotientMap energy_map() {
    QuotientMap phi;
    phi.source = plane_chart();
    phi.target = half_line_chart("h");
    Expr x = Expr::symbol("x"), y = Expr::symbol("y");
    phi.components = {(x * x + y * y) / Expr::integer(2)};
    phi.section = {sqrt(Expr::integer(2) * Expr::symbol("h")), Expr()};
    return phi;
}

QuotientMap torus_projection() {
    QuotientMap phi;
    phi.source = torus_chart(2);
    phi.target = torus_chart(1);
    phi.target.coords[0].name = "theta2";
    phi.components = {Expr::symbol("theta2")};
    phi.section = {Expr(), Expr::symbol("theta2")};
    return phi;
}

Sds torus_counterexample() {
    Chart c = torus_chart(2);
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[1] = sin(Expr::integer(2) * Expr::pi() * Expr::symbol("theta1"));
    return s;
}

} // namespace sds
