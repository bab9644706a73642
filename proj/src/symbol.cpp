#include "sds/symbol.hpp"

#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace sds {

namespace {

int abs_order(const std::vector<int>& alpha) {
    int s = 0;
    for (int a : alpha) s += a;
    return s;
}

// Symmetric order-2 coefficient matrix a^{jk}(x): the operator's pure
// second derivatives sit on the diagonal, mixed ones split in half.
Eigen::MatrixXd order2_matrix(const DiffOp& a, const std::map<std::string, double>& x) {
    int n = a.chart.dim();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [alpha, c] : a.coef) {
        if (abs_order(alpha) != 2) continue;
        int j = -1, k = -1;
        for (int i = 0; i < n; ++i) {
            if (alpha[i] == 2) j = k = i;
            else if (alpha[i] == 1) (j < 0 ? j : k) = i;
        }
        double v = c.eval(x);
        if (j == k) m(j, j) = v;
        else m(j, k) = m(k, j) = v / 2.0;
    }
    return m;
}

bool cholesky_pd(const Eigen::MatrixXd& m, double pivot_floor) {
    int n = static_cast<int>(m.rows());
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        double d = m(k, k);
        for (int j = 0; j < k; ++j) d -= l(k, j) * l(k, j);
        if (d <= pivot_floor) return false;
        l(k, k) = std::sqrt(d);
        for (int i = k + 1; i < n; ++i) {
            double s = m(i, k);
            for (int j = 0; j < k; ++j) s -= l(i, j) * l(k, j);
            l(i, k) = s / l(k, k);
        }
    }
    return true;
}

int svd_rank(const Eigen::MatrixXd& m, std::vector<double>* sv = nullptr) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (sv) sv->assign(s.data(), s.data() + s.size());
    if (s.size() == 0) return 0;
    double cut = 1e-8 * s(0);
    int r = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s(i) > cut) ++r;
    return r;
}

Expr cofactor_det(const std::vector<std::vector<Expr>>& m) {
    size_t n = m.size();
    if (n == 0) return Expr::integer(1);
    if (n == 1) return m[0][0];
    Expr det;
    for (size_t c = 0; c < n; ++c) {
        std::vector<std::vector<Expr>> minor;
        for (size_t i = 1; i < n; ++i) {
            std::vector<Expr> row;
            for (size_t j = 0; j < n; ++j)
                if (j != c) row.push_back(m[i][j]);
            minor.push_back(std::move(row));
        }
        Expr term = m[0][c] * cofactor_det(minor);
        det += (c % 2 == 0) ? term : Expr::integer(-1) * term;
    }
    return det;
}

} // namespace

int CotangentPoly::degree() const {
    int d = 0;
    for (const auto& [alpha, c] : coef) d = std::max(d, abs_order(alpha));
    return d;
}

Expr CotangentPoly::coefficient(const std::vector<int>& alpha) const {
    auto it = coef.find(alpha);
    return it == coef.end() ? Expr() : it->second;
}

void CotangentPoly::set(const std::vector<int>& alpha, const Expr& e) {
    if (e.is_zero_literal()) coef.erase(alpha);
    else coef[alpha] = e;
}

double CotangentPoly::eval(const std::map<std::string, double>& xp) const {
    double out = 0;
    for (const auto& [alpha, c] : coef) {
        double m = c.eval(xp);
        for (size_t j = 0; j < alpha.size(); ++j) {
            auto it = xp.find("p_" + chart.coords[j].name);
            if (it == xp.end()) throw EvalError("unbound momentum p_" + chart.coords[j].name);
            for (int k = 0; k < alpha[j]; ++k) m *= it->second;
        }
        out += m;
    }
    return out;
}

CotangentPoly CotangentPoly::dp(int j) const {
    CotangentPoly out = CotangentPoly::zero(chart);
    for (const auto& [alpha, c] : coef) {
        if (alpha[j] == 0) continue;
        std::vector<int> beta = alpha;
        --beta[j];
        out.set(beta, out.coefficient(beta) + Expr::integer(alpha[j]) * c);
    }
    return out;
}

CotangentPoly CotangentPoly::dx(int j) const {
    CotangentPoly out = CotangentPoly::zero(chart);
    const std::string& name = chart.coords[j].name;
    for (const auto& [alpha, c] : coef)
        out.set(alpha, c.differentiate(name));
    return out;
}

CotangentPoly& CotangentPoly::operator+=(const CotangentPoly& o) {
    if (!chart.same_as(o.chart))
        throw std::invalid_argument("cotangent sum: charts differ");
    for (const auto& [alpha, c] : o.coef) set(alpha, coefficient(alpha) + c);
    return *this;
}

CotangentPoly operator-(const CotangentPoly& a, const CotangentPoly& b) {
    return a + Expr::integer(-1) * b;
}

CotangentPoly operator*(const CotangentPoly& a, const CotangentPoly& b) {
    if (!a.chart.same_as(b.chart))
        throw std::invalid_argument("cotangent product: charts differ");
    CotangentPoly out = CotangentPoly::zero(a.chart);
    for (const auto& [alpha, ca] : a.coef)
        for (const auto& [beta, cb] : b.coef) {
            std::vector<int> idx(alpha.size());
            for (size_t i = 0; i < idx.size(); ++i) idx[i] = alpha[i] + beta[i];
            out.set(idx, out.coefficient(idx) + ca * cb);
        }
    return out;
}

CotangentPoly operator*(const Expr& s, const CotangentPoly& p) {
    CotangentPoly out = CotangentPoly::zero(p.chart);
    for (const auto& [alpha, c] : p.coef) out.set(alpha, s * c);
    return out;
}

std::string CotangentPoly::str() const {
    if (coef.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [alpha, c] : coef) {
        if (!first) os << " + ";
        first = false;
        os << "(" << c.str() << ")";
        for (size_t j = 0; j < alpha.size(); ++j) {
            if (alpha[j] == 0) continue;
            os << "*p_" << chart.coords[j].name;
            if (alpha[j] > 1) os << "^" << alpha[j];
        }
    }
    return os.str();
}

CotangentPoly principal_symbol(const DiffOp& a) {
    CotangentPoly out = CotangentPoly::zero(a.chart);
    int m = a.order();
    for (const auto& [alpha, c] : a.coef)
        if (abs_order(alpha) == m) out.set(alpha, c);
    return out;
}

CotangentPoly poisson_bracket(const CotangentPoly& p, const CotangentPoly& q) {
    if (!p.chart.same_as(q.chart))
        throw std::invalid_argument("poisson bracket: charts differ");
    CotangentPoly out = CotangentPoly::zero(p.chart);
    for (int j = 0; j < p.chart.dim(); ++j) {
        out += p.dp(j) * q.dx(j);
        out += Expr::integer(-1) * (p.dx(j) * q.dp(j));
    }
    return out;
}

RankReport independence_rank(const std::vector<CotangentPoly>& symbols,
                             int samples, std::uint64_t seed) {
    RankReport rep;
    if (symbols.empty() || samples < 1) return rep;
    const Chart& chart = symbols.front().chart;
    int n = chart.dim();
    int m = static_cast<int>(symbols.size());

    std::vector<std::vector<CotangentPoly>> dxs(m), dps(m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            dxs[i].push_back(symbols[i].dx(j));
            dps[i].push_back(symbols[i].dp(j));
        }

    SampleDomain dom = chart.sample_domain();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_real_distribution<double> mom(-2.0, 2.0);

    for (int s = 0; s < samples; ++s) {
        std::map<std::string, double> pt;
        for (const auto& r : dom) pt[r.name] = r.lo + (r.hi - r.lo) * unif(rng);
        for (int j = 0; j < n; ++j) pt["p_" + chart.coords[j].name] = mom(rng);

        Eigen::MatrixXd jac(m, 2 * n);
        bool ok = true;
        try {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    jac(i, j) = dxs[i][j].eval(pt);
                    jac(i, n + j) = dps[i][j].eval(pt);
                }
        } catch (const EvalError&) {
            ok = false;
        }
        if (!ok) continue;
        ++rep.samples_used;

        std::vector<double> sv;
        int r = svd_rank(jac, &sv);
        if (r > rep.rank) {
            rep.rank = r;
            rep.witness = pt;
            rep.singular_values = sv;
        }
    }
    return rep;
}

int quadratic_rank_at(const std::vector<CotangentPoly>& symbols,
                      const std::map<std::string, double>& x) {
    if (symbols.empty()) return 0;
    int n = symbols.front().chart.dim();
    int cols = n * (n + 1) / 2;
    Eigen::MatrixXd forms(static_cast<int>(symbols.size()), cols);
    for (size_t i = 0; i < symbols.size(); ++i) {
        int col = 0;
        for (int j = 0; j < n; ++j) {
            std::vector<int> alpha(n, 0);
            alpha[j] = 2;
            forms(static_cast<int>(i), col++) = symbols[i].coefficient(alpha).eval(x);
        }
        for (int j = 0; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                std::vector<int> alpha(n, 0);
                alpha[j] = alpha[k] = 1;
                forms(static_cast<int>(i), col++) = symbols[i].coefficient(alpha).eval(x);
            }
    }
    return svd_rank(forms);
}

SpanReport span_at(const DiffOp& a, const std::map<std::string, double>& x) {
    if (a.order() > 2) throw std::invalid_argument("span_at: operator order exceeds 2");
    Eigen::MatrixXd m = order2_matrix(a, x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    double top = es.eigenvalues().cwiseAbs().maxCoeff();
    SpanReport rep;
    if (top == 0.0) return rep;
    for (int i = 0; i < m.rows(); ++i) {
        if (std::abs(es.eigenvalues()(i)) <= 1e-8 * top) continue;
        ++rep.dimension;
        Eigen::VectorXd v = es.eigenvectors().col(i);
        rep.basis.emplace_back(v.data(), v.data() + v.size());
    }
    return rep;
}

bool ellipticity_check(const std::vector<DiffOp>& ops,
                       const std::vector<double>& weights,
                       const std::map<std::string, double>& x) {
    if (ops.empty() || ops.size() != weights.size())
        throw std::invalid_argument("ellipticity_check: one weight per operator");
    int n = ops.front().chart.dim();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (size_t i = 0; i < ops.size(); ++i) {
        if (ops[i].chart.dim() != n)
            throw std::invalid_argument("ellipticity_check: dimension mismatch");
        if (ops[i].order() > 2)
            throw std::invalid_argument("ellipticity_check: operator order exceeds 2");
        if (weights[i] <= 0)
            throw std::invalid_argument("ellipticity_check: weights must be positive");
        m += weights[i] * order2_matrix(ops[i], x);
    }
    return cholesky_pd(m, 1e-12);
}

MetricReport metric_from_elliptic(const DiffOp& a) {
    const Chart& chart = a.chart;
    int n = chart.dim();
    if (a.order() > 2) throw std::invalid_argument("metric_from_elliptic: order exceeds 2");
    if (!a.zeroth_order_vanishes())
        throw std::invalid_argument("metric_from_elliptic: zeroth-order term present");

    // inverse metric g^{jk} = 2 a^{jk}
    std::vector<std::vector<Expr>> twoa(n, std::vector<Expr>(n));
    for (int j = 0; j < n; ++j) {
        std::vector<int> alpha(n, 0);
        alpha[j] = 2;
        twoa[j][j] = Expr::integer(2) * a.coefficient(alpha);
    }
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            std::vector<int> alpha(n, 0);
            alpha[j] = alpha[k] = 1;
            twoa[j][k] = twoa[k][j] = a.coefficient(alpha);
        }

    // definiteness on the sampling box before any symbolic inversion
    {
        SampleDomain dom = chart.sample_domain();
        std::mt19937_64 rng(0x9d7a1cULL);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        int valid = 0;
        for (int s = 0; s < 16; ++s) {
            std::map<std::string, double> pt;
            for (const auto& r : dom) pt[r.name] = r.lo + (r.hi - r.lo) * unif(rng);
            Eigen::MatrixXd m(n, n);
            try {
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) m(j, k) = twoa[j][k].eval(pt);
            } catch (const EvalError&) {
                continue;
            }
            ++valid;
            if (!cholesky_pd(m, 1e-12))
                throw std::invalid_argument("metric_from_elliptic: coefficient matrix not positive definite");
        }
        if (valid == 0)
            throw std::invalid_argument("metric_from_elliptic: coefficient matrix unsampleable");
    }

    Expr det = cofactor_det(twoa);
    if (det.is_zero_literal())
        throw std::invalid_argument("metric_from_elliptic: coefficient matrix singular");
    Expr inv_det = Expr::integer(1) / det;

    auto positive = chart.positive_coords();

    // adjugate / det, entry by entry
    MetricReport rep;
    rep.metric.assign(n, std::vector<Expr>(n));
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            std::vector<std::vector<Expr>> minor;
            for (int r = 0; r < n; ++r) {
                if (r == k) continue;
                std::vector<Expr> row;
                for (int c = 0; c < n; ++c)
                    if (c != j) row.push_back(twoa[r][c]);
                minor.push_back(std::move(row));
            }
            Expr cof = cofactor_det(minor);
            if ((j + k) % 2 == 1) cof = Expr::integer(-1) * cof;
            rep.metric[j][k] = (cof * inv_det).assume_positive(positive);
        }

    rep.volume = sds::sqrt(inv_det).assume_positive(positive);
    Expr inv_volume = (Expr::integer(1) / rep.volume).assume_positive(positive);

    // half Laplace-Beltrami operator of g, then the remainder
    DiffOp half_lb = DiffOp::zero(chart);
    Expr half = Expr::rational(Rational(1, 2));
    for (int j = 0; j < n; ++j) {
        std::vector<int> alpha(n, 0);
        alpha[j] = 2;
        half_lb.set(alpha, half * twoa[j][j]);
    }
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            std::vector<int> alpha(n, 0);
            alpha[j] = alpha[k] = 1;
            half_lb.set(alpha, twoa[j][k]);
        }
    for (int k = 0; k < n; ++k) {
        Expr div;
        for (int j = 0; j < n; ++j)
            div += (rep.volume * twoa[j][k]).differentiate(chart.coords[j].name);
        std::vector<int> alpha(n, 0);
        alpha[k] = 1;
        half_lb.set(alpha, (half * inv_volume * div).assume_positive(positive));
    }

    DiffOp v = a - half_lb;
    if (v.order() > 1 || !v.zeroth_order_vanishes())
        throw std::logic_error("metric_from_elliptic: remainder is not a drift");
    rep.drift = VectorField::zero(chart);
    for (int k = 0; k < n; ++k) {
        std::vector<int> alpha(n, 0);
        alpha[k] = 1;
        rep.drift.comps[k] = v.coefficient(alpha);
    }
    return rep;
}

} // namespace sds
