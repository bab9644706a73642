#include "sds/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace sds {

namespace {

constexpr double k_tau = 6.283185307179586476925286766559;

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// ---- compiled Heun stepper ----------------------------------------------

struct Stepper {
    int dim = 0;
    int m = 0;  // noise fields
    std::vector<CompiledExpr> drift;               // dim
    std::vector<std::vector<CompiledExpr>> noise;  // m x dim
    bool with_j = false;
    std::vector<CompiledExpr> ddrift;               // dim*dim, d drift_i / d x_j
    std::vector<std::vector<CompiledExpr>> dnoise;  // m x dim*dim
    bool wrap = true;
    std::vector<std::pair<int, double>> periods;  // periodic coordinate, period value
    std::vector<std::pair<int, double>> lowers;   // bounded coordinate, strict bound
    std::vector<std::pair<int, double>> uppers;

    // work buffers
    std::vector<double> a, at, xt, mat, ja, jat, jt;

    Stepper(const Sds& x, bool jacobian, bool wrap_periodic) {
        const Chart& c = x.chart;
        dim = c.dim();
        m = static_cast<int>(x.noise.size());
        with_j = jacobian;
        wrap = wrap_periodic;
        std::vector<std::string> layout = c.coord_names();

        auto compile_field = [&](const VectorField& v) {
            std::vector<CompiledExpr> out;
            for (int i = 0; i < dim; ++i) out.emplace_back(v.comps[i], layout);
            return out;
        };
        auto compile_jacobian = [&](const VectorField& v) {
            std::vector<CompiledExpr> out;
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j)
                    out.emplace_back(v.comps[i].differentiate(layout[j]), layout);
            return out;
        };
        drift = compile_field(x.drift);
        for (const auto& f : x.noise) noise.push_back(compile_field(f));
        if (with_j) {
            ddrift = compile_jacobian(x.drift);
            for (const auto& f : x.noise) dnoise.push_back(compile_jacobian(f));
        }
        for (int j = 0; j < dim; ++j) {
            const CoordSpec& spec = c.coords[j];
            if (spec.periodic) {
                periods.emplace_back(j, spec.period.eval({}));
            } else {
                if (spec.lower) lowers.emplace_back(j, *spec.lower);
                if (spec.upper) uppers.emplace_back(j, *spec.upper);
            }
        }
        a.resize(dim);
        at.resize(dim);
        xt.resize(dim);
        if (with_j) {
            mat.resize(static_cast<std::size_t>(dim) * dim);
            ja.resize(mat.size());
            jat.resize(mat.size());
            jt.resize(mat.size());
        }
    }

    bool in_domain(const std::vector<double>& x) const {
        for (double v : x)
            if (!std::isfinite(v)) return false;
        for (const auto& [j, b] : lowers)
            if (x[j] <= b) return false;
        for (const auto& [j, b] : uppers)
            if (x[j] >= b) return false;
        return true;
    }

    // full Stratonovich increment at a point: drift dt plus noise dB
    void increment(const double* x, double dt, const double* db, std::vector<double>& out) {
        for (int i = 0; i < dim; ++i) out[i] = drift[i].eval(x) * dt;
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < dim; ++i) out[i] += noise[j][i].eval(x) * db[j];
    }

    // (DX_0 dt + sum DX_j dB_j)(x), then right-multiplied by J
    void jacobian_increment(const double* x, double dt, const double* db, const double* J,
                            std::vector<double>& out) {
        for (int e = 0; e < dim * dim; ++e) mat[e] = ddrift[e].eval(x) * dt;
        for (int j = 0; j < m; ++j)
            for (int e = 0; e < dim * dim; ++e) mat[e] += dnoise[j][e].eval(x) * db[j];
        for (int i = 0; i < dim; ++i)
            for (int k = 0; k < dim; ++k) {
                double s = 0;
                for (int l = 0; l < dim; ++l) s += mat[i * dim + l] * J[l * dim + k];
                out[i * dim + k] = s;
            }
    }

    // One Heun step; x (and J when enabled) are updated only on success.
    bool step(std::vector<double>& x, std::vector<double>& J, double dt, const double* db) {
        increment(x.data(), dt, db, a);
        for (int i = 0; i < dim; ++i) xt[i] = x[i] + a[i];
        for (double v : xt)
            if (!std::isfinite(v)) return false;
        increment(xt.data(), dt, db, at);
        if (with_j) {
            jacobian_increment(x.data(), dt, db, J.data(), ja);
            for (std::size_t e = 0; e < ja.size(); ++e) jt[e] = J[e] + ja[e];
            jacobian_increment(xt.data(), dt, db, jt.data(), jat);
        }
        for (int i = 0; i < dim; ++i) xt[i] = x[i] + 0.5 * (a[i] + at[i]);
        if (!in_domain(xt)) return false;
        if (wrap)
            for (const auto& [j, p] : periods) {
                xt[j] = std::fmod(xt[j], p);
                if (xt[j] < 0) xt[j] += p;
            }
        x = xt;
        if (with_j)
            for (std::size_t e = 0; e < J.size(); ++e) {
                J[e] += 0.5 * (ja[e] + jat[e]);
                if (!std::isfinite(J[e])) return false;
            }
        return true;
    }
};

std::vector<double> identity_matrix(int dim) {
    std::vector<double> J(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) J[i * dim + i] = 1.0;
    return J;
}

long long step_count(double dt, double horizon) {
    if (dt <= 0) throw std::invalid_argument("integrate: nonpositive dt");
    if (horizon < 0) throw std::invalid_argument("integrate: negative horizon");
    return std::llround(horizon / dt);
}

void mean_and_error(const std::vector<double>& v, double& mean, double& var, double& se) {
    mean = var = se = 0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size() - 1);
    }
    se = std::sqrt(var / static_cast<double>(v.size()));
}

} // namespace

// ---- rng -----------------------------------------------------------------

double NormalStream::uniform() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>((z >> 11) + 1) * 0x1.0p-53;
}

double NormalStream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double radius = std::sqrt(-2.0 * std::log(uniform()));
    double angle = k_tau * uniform();
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

NormalStream trajectory_stream(const RngConfig& cfg, std::uint64_t index) {
    return NormalStream(mix64(mix64(cfg.master) ^ (index + 0x632be59bd9b4e019ULL)));
}

// ---- integration ---------------------------------------------------------

Trajectory integrate(const Sds& x, const std::vector<double>& x0, double dt, double horizon,
                     const RngConfig& rng, std::uint64_t stream, const IntegrateOptions& opts) {
    long long steps = step_count(dt, horizon);
    if (opts.stride < 1) throw std::invalid_argument("integrate: stride < 1");
    Stepper st(x, opts.with_jacobian, opts.wrap_periodic);
    if (static_cast<int>(x0.size()) != st.dim)
        throw std::invalid_argument("integrate: x0 has the wrong dimension");
    if (!st.in_domain(x0)) throw std::invalid_argument("integrate: x0 out of domain");

    Trajectory traj;
    traj.chart = x.chart;
    traj.dt = dt;
    traj.horizon = horizon;
    traj.stride = opts.stride;
    traj.stream = stream;
    traj.states.reserve(static_cast<std::size_t>(steps / opts.stride) + 2);

    NormalStream ns = trajectory_stream(rng, stream);
    std::vector<double> xs = x0;
    std::vector<double> J = opts.with_jacobian ? identity_matrix(st.dim) : std::vector<double>{};
    std::vector<double> db(std::max(st.m, 1));

    auto record = [&]() {
        traj.states.push_back(xs);
        if (opts.with_jacobian) traj.jacobians.push_back(J);
    };
    record();

    double sq = std::sqrt(dt);
    for (long long k = 1; k <= steps; ++k) {
        for (int j = 0; j < st.m; ++j) db[j] = sq * ns.normal();
        if (!st.step(xs, J, dt, db.data())) {
            traj.truncated = true;
            if (traj.states.back() != xs) record();  // last in-domain state
            return traj;
        }
        if (k % opts.stride == 0 || k == steps) record();
    }
    return traj;
}

// ---- ensembles -----------------------------------------------------------

std::vector<SampleSet> sampled_observable(const Sds& x, const std::vector<double>& x0,
                                          const Expr& g, double dt,
                                          const std::vector<double>& times, int paths,
                                          const RngConfig& rng) {
    if (times.empty()) throw std::invalid_argument("sampled_observable: no sample times");
    if (paths < 1) throw std::invalid_argument("sampled_observable: no paths");
    std::vector<long long> idx;
    long long maxk = 0;
    for (double t : times) {
        idx.push_back(step_count(dt, t));
        maxk = std::max(maxk, idx.back());
    }
    Stepper st(x, false, true);
    if (static_cast<int>(x0.size()) != st.dim)
        throw std::invalid_argument("sampled_observable: x0 has the wrong dimension");
    if (!st.in_domain(x0)) throw std::invalid_argument("sampled_observable: x0 out of domain");
    CompiledExpr gc(g, x.chart.coord_names());

    std::vector<SampleSet> out(times.size());
    std::vector<double> pending(times.size());
    std::vector<double> db(std::max(st.m, 1));
    double sq = std::sqrt(dt);
    for (int p = 0; p < paths; ++p) {
        NormalStream ns = trajectory_stream(rng, static_cast<std::uint64_t>(p));
        std::vector<double> xs = x0;
        std::vector<double> J;
        bool alive = true;
        for (std::size_t s = 0; s < idx.size(); ++s)
            if (idx[s] == 0) pending[s] = gc.eval(xs.data());
        for (long long k = 1; k <= maxk && alive; ++k) {
            for (int j = 0; j < st.m; ++j) db[j] = sq * ns.normal();
            alive = st.step(xs, J, dt, db.data());
            if (alive)
                for (std::size_t s = 0; s < idx.size(); ++s)
                    if (idx[s] == k) pending[s] = gc.eval(xs.data());
        }
        for (std::size_t s = 0; s < idx.size(); ++s) {
            if (alive) out[s].values.push_back(pending[s]);
            else ++out[s].truncated;
        }
    }
    return out;
}

SampleSet terminal_samples(const Sds& x, const std::vector<double>& x0, const Expr& g, double dt,
                           double horizon, int paths, const RngConfig& rng) {
    return sampled_observable(x, x0, g, dt, {horizon}, paths, rng)[0];
}

EnsembleStats summarize(std::vector<double> values, std::size_t truncated, double lo, double hi,
                        int bins) {
    if (bins < 1) throw std::invalid_argument("summarize: bins < 1");
    if (hi <= lo) throw std::invalid_argument("summarize: empty range");
    EnsembleStats s;
    s.n = values.size() + truncated;
    s.truncated = truncated;
    mean_and_error(values, s.mean, s.variance, s.std_error);
    double w = (hi - lo) / bins;
    s.edges.resize(bins + 1);
    for (int k = 0; k <= bins; ++k) s.edges[k] = lo + k * w;
    s.counts.assign(bins, 0);
    for (double v : values)  // clamped so counts always sum to the kept paths
        ++s.counts[std::clamp(static_cast<int>((v - lo) / w), 0, bins - 1)];
    s.values = std::move(values);
    return s;
}

// ---- generator estimation ------------------------------------------------

GeneratorEstimate empirical_generator(const Sds& x, const Expr& f, const std::vector<double>& x0,
                                      double t, int paths, const RngConfig& rng) {
    if (t <= 0) throw std::invalid_argument("empirical_generator: nonpositive t");
    if (paths < 100) throw std::invalid_argument("empirical_generator: need at least 100 paths");
    const int steps = 20;
    double dt = t / steps;
    Stepper st(x, false, true);
    if (!st.in_domain(x0)) throw std::invalid_argument("empirical_generator: x0 out of domain");
    CompiledExpr fc(f, x.chart.coord_names());
    double f0 = fc.eval(x0.data());

    std::vector<double> diffs;
    diffs.reserve(paths);
    std::size_t truncated = 0;
    std::vector<double> db(std::max(st.m, 1));
    std::vector<double> J;
    double sq = std::sqrt(dt);
    for (int p = 0; p < paths; ++p) {
        NormalStream ns = trajectory_stream(rng, static_cast<std::uint64_t>(p));
        std::vector<double> xs = x0;
        bool alive = true;
        for (int k = 0; k < steps && alive; ++k) {
            for (int j = 0; j < st.m; ++j) db[j] = sq * ns.normal();
            alive = st.step(xs, J, dt, db.data());
        }
        if (alive) diffs.push_back((fc.eval(xs.data()) - f0) / t);
        else ++truncated;
    }
    if (truncated * 2 > static_cast<std::size_t>(paths))
        throw std::runtime_error("empirical_generator: truncated majority");

    GeneratorEstimate est;
    est.step = dt;
    est.paths = paths;
    est.truncated = truncated;
    double var = 0;
    mean_and_error(diffs, est.estimate, var, est.std_error);
    return est;
}

// ---- stationary density --------------------------------------------------

StationaryDensityReport stationary_density_1d(const Sds& x, double x0,
                                              const StationaryDensityOptions& opts,
                                              const RngConfig& rng) {
    if (x.chart.dim() != 1)
        throw std::invalid_argument("stationary_density_1d: chart is not one-dimensional");
    return stationary_density_1d(x, Expr::symbol(x.chart.coords[0].name), {x0}, x, opts, rng);
}

StationaryDensityReport stationary_density_1d(const Sds& sampler, const Expr& observable,
                                              const std::vector<double>& x0, const Sds& oracle,
                                              const StationaryDensityOptions& opts,
                                              const RngConfig& rng) {
    if (oracle.chart.dim() != 1)
        throw std::invalid_argument("stationary_density_1d: chart is not one-dimensional");
    if (opts.bins < 3 || opts.hi <= opts.lo)
        throw std::invalid_argument("stationary_density_1d: bad range");
    if (opts.horizon <= opts.burn_in)
        throw std::invalid_argument("stationary_density_1d: horizon inside burn-in");
    const std::string coord = oracle.chart.coords[0].name;
    std::vector<std::string> layout = {coord};
    CompiledExpr mu(oracle.drift.comps[0], layout);
    Expr sig2_expr;
    for (const auto& f : oracle.noise) sig2_expr += f.comps[0] * f.comps[0];
    CompiledExpr sig2(sig2_expr, layout);

    // closed-form stationary solution on a bin-aligned fine grid
    const int per_bin = 128;
    const int grid_n = opts.bins * per_bin;  // intervals; even
    const double w = (opts.hi - opts.lo) / opts.bins;
    const double h = (opts.hi - opts.lo) / grid_n;
    std::vector<double> logp(grid_n + 1), dens(grid_n + 1);
    double cum = 0, prev = 0;
    for (int k = 0; k <= grid_n; ++k) {
        double r = opts.lo + k * h;
        double s2 = sig2.eval(&r);
        if (!(s2 > 0))
            throw std::invalid_argument("stationary_density_1d: noise vanishes on the range");
        double s = 2.0 * mu.eval(&r) / s2;
        if (k > 0) cum += 0.5 * h * (prev + s);
        prev = s;
        logp[k] = cum - std::log(s2);
    }
    double top = *std::max_element(logp.begin(), logp.end());
    for (int k = 0; k <= grid_n; ++k) dens[k] = std::exp(logp[k] - top);
    auto simpson = [&](int a, int b) {  // over grid indices, b - a even
        double s = dens[a] + dens[b];
        for (int k = a + 1; k < b; ++k) s += dens[k] * (((k - a) % 2) ? 4.0 : 2.0);
        return s * h / 3.0;
    };
    double mass = simpson(0, grid_n);
    for (double& d : dens) d /= mass;
    double re_mass = 0;  // trapezoid re-check of the Simpson normalization
    for (int k = 0; k < grid_n; ++k) re_mass += 0.5 * h * (dens[k] + dens[k + 1]);

    StationaryDensityReport rep;
    rep.oracle_mass = re_mass;
    rep.edges.resize(opts.bins + 1);
    for (int k = 0; k <= opts.bins; ++k) rep.edges[k] = opts.lo + k * w;
    rep.oracle.resize(opts.bins);
    for (int b = 0; b < opts.bins; ++b)
        rep.oracle[b] = simpson(b * per_bin, (b + 1) * per_bin) / w;

    // ensemble sweep
    Stepper st(sampler, false, true);
    CompiledExpr g(observable, sampler.chart.coord_names());
    const std::vector<double>& start = x0;
    if (start.size() != static_cast<std::size_t>(st.dim) || !st.in_domain(start))
        throw std::invalid_argument("stationary_density_1d: x0 out of domain");
    long long steps = step_count(opts.dt, opts.horizon);
    long long burn = step_count(opts.dt, opts.burn_in);
    long long half = burn + (steps - burn) / 2;
    std::vector<std::size_t> counts(opts.bins, 0);
    std::size_t below = 0, total = 0, in_range = 0, truncated_paths = 0;
    double sum = 0, sum1 = 0, sum2 = 0;
    std::size_t n1 = 0, n2 = 0;
    std::vector<double> db(std::max(st.m, 1));
    std::vector<double> J;
    double sq = std::sqrt(opts.dt);
    for (int p = 0; p < opts.paths; ++p) {
        NormalStream ns = trajectory_stream(rng, static_cast<std::uint64_t>(p));
        std::vector<double> xs = start;
        bool alive = true;
        for (long long k = 1; k <= steps && alive; ++k) {
            for (int j = 0; j < st.m; ++j) db[j] = sq * ns.normal();
            alive = st.step(xs, J, opts.dt, db.data());
            if (!alive || k <= burn) continue;
            double r = g.eval(xs.data());
            ++total;
            sum += r;
            if (k <= half) {
                sum1 += r;
                ++n1;
            } else {
                sum2 += r;
                ++n2;
            }
            if (r < opts.lo) ++below;
            else if (r < opts.hi) {
                ++counts[std::min(opts.bins - 1, static_cast<int>((r - opts.lo) / w))];
                ++in_range;
            }
        }
        if (!alive) ++truncated_paths;
    }
    if (truncated_paths * 2 > static_cast<std::size_t>(opts.paths))
        throw std::runtime_error("stationary_density_1d: truncated majority");
    if (total == 0) throw std::runtime_error("stationary_density_1d: no samples");
    if (in_range * 2 < total)
        throw std::runtime_error("stationary_density_1d: range captures under half of the mass");
    double m1 = n1 ? sum1 / static_cast<double>(n1) : 0;
    double m2 = n2 ? sum2 / static_cast<double>(n2) : 0;
    if (std::abs(m1 - m2) > 0.1 * (opts.hi - opts.lo))
        throw std::runtime_error("stationary_density_1d: burn-in drift test failed");

    rep.samples = in_range;
    rep.mean = sum / static_cast<double>(total);
    rep.empirical.resize(opts.bins);
    rep.z.resize(opts.bins);
    const double inflate = std::sqrt(1.0 + 2.0 / opts.dt);  // correlation time 1.0
    for (int b = 0; b < opts.bins; ++b) {
        rep.empirical[b] = static_cast<double>(counts[b]) / (static_cast<double>(in_range) * w);
        double se = std::sqrt(rep.oracle[b] / (static_cast<double>(in_range) * w)) * inflate;
        rep.z[b] = se > 0 ? (rep.empirical[b] - rep.oracle[b]) / se : 0.0;
        rep.sup_distance = std::max(rep.sup_distance, std::abs(rep.empirical[b] - rep.oracle[b]));
    }

    // median: CDF over all samples, interpolated inside the crossing bin
    double target = 0.5 * static_cast<double>(total);
    double cdf = static_cast<double>(below);
    rep.median = opts.lo;
    for (int b = 0; b < opts.bins; ++b) {
        double next = cdf + static_cast<double>(counts[b]);
        if (next >= target) {
            double frac = counts[b] ? (target - cdf) / static_cast<double>(counts[b]) : 0.5;
            rep.median = rep.edges[b] + frac * w;
            break;
        }
        cdf = next;
    }

    // mode: parabolic vertex through the peak bin and its neighbors
    int peak = static_cast<int>(std::max_element(rep.empirical.begin(), rep.empirical.end()) -
                                rep.empirical.begin());
    double center = rep.edges[peak] + 0.5 * w;
    if (peak > 0 && peak < opts.bins - 1) {
        double dl = rep.empirical[peak - 1], dc = rep.empirical[peak], dr = rep.empirical[peak + 1];
        double denom = dl - 2 * dc + dr;
        if (denom < 0) center += 0.5 * w * (dl - dr) / denom;
    }
    rep.mode = center;
    return rep;
}

// ---- martingale test -----------------------------------------------------

bool MartingaleReport::pass() const {
    for (double z : window_z)
        if (!(std::abs(z) < 3.0)) return false;
    return !window_z.empty();
}

MartingaleReport martingale_test(const std::vector<std::vector<double>>& theta, double dt,
                                 int windows) {
    if (theta.size() < 30)
        throw std::invalid_argument("martingale_test: insufficient samples (need 30 paths)");
    if (dt <= 0) throw std::invalid_argument("martingale_test: nonpositive dt");
    if (windows < 1) throw std::invalid_argument("martingale_test: no windows");
    std::size_t len = theta.front().size();
    if (len < static_cast<std::size_t>(windows) + 1)
        throw std::invalid_argument("martingale_test: series shorter than the window count");
    MartingaleReport rep;
    for (const auto& path : theta) {
        if (path.size() != len) throw std::invalid_argument("martingale_test: ragged series");
        for (std::size_t k = 1; k < len; ++k)
            rep.max_step = std::max(rep.max_step, std::abs(path[k] - path[k - 1]));
    }
    if (rep.max_step >= k_tau / 2)
        throw std::runtime_error("martingale_test: angle step reached pi; reduce the step size");

    std::size_t steps = len - 1;
    double horizon = static_cast<double>(steps) * dt;
    std::vector<double> acc(theta.size());
    for (int wnd = 0; wnd < windows; ++wnd) {
        std::size_t a = steps * wnd / windows;
        std::size_t b = steps * (wnd + 1) / windows;
        double span = static_cast<double>(b - a) * dt;
        for (std::size_t p = 0; p < theta.size(); ++p) acc[p] = theta[p][b] - theta[p][a] - span;
        double mean, var, se;
        mean_and_error(acc, mean, var, se);
        rep.window_z.push_back(se > 0 ? mean / se : 0.0);
    }
    for (std::size_t p = 0; p < theta.size(); ++p)
        acc[p] = (theta[p][steps] - theta[p][0]) / horizon;
    double var = 0;
    mean_and_error(acc, rep.mean_frequency, var, rep.frequency_std_error);
    return rep;
}

std::vector<std::vector<double>> angle_series(const Sds& x, const std::vector<double>& x0,
                                              int ix, int iy, double dt, double horizon,
                                              int paths, const RngConfig& rng) {
    int dim = x.chart.dim();
    if (ix < 0 || iy < 0 || ix >= dim || iy >= dim || ix == iy)
        throw std::invalid_argument("angle_series: bad coordinate pair");
    if (paths < 1) throw std::invalid_argument("angle_series: no paths");
    std::vector<std::vector<double>> series;
    series.reserve(paths);
    for (int p = 0; p < paths; ++p) {
        Trajectory t = integrate(x, x0, dt, horizon, rng, static_cast<std::uint64_t>(p));
        if (t.truncated) throw std::runtime_error("angle_series: path truncated");
        std::vector<double> theta;
        theta.reserve(t.states.size());
        double acc = std::atan2(t.states.front()[iy], t.states.front()[ix]);
        double prev = acc;
        theta.push_back(acc);
        for (std::size_t k = 1; k < t.states.size(); ++k) {
            double raw = std::atan2(t.states[k][iy], t.states[k][ix]);
            acc += std::remainder(raw - prev, k_tau);  // nearest-branch continuation
            prev = raw;
            theta.push_back(acc);
        }
        series.push_back(std::move(theta));
    }
    return series;
}

// ---- Kolmogorov-Smirnov --------------------------------------------------

KsReport ks_compare(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_compare: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    KsReport rep;
    rep.na = a.size();
    rep.nb = b.size();
    std::size_t i = 0, j = 0;
    double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    while (i < a.size() && j < b.size()) {
        double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        rep.statistic = std::max(rep.statistic,
                                 std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    rep.threshold = 1.628 * std::sqrt((na + nb) / (na * nb));
    return rep;
}

// ---- tensor preservation -------------------------------------------------

namespace {

void require_constant_form(const Chart& c, const std::vector<std::vector<double>>& omega) {
    int dim = c.dim();
    if (dim % 2 != 0)
        throw std::invalid_argument("tensor_preservation: chart dimension is odd");
    if (static_cast<int>(omega.size()) != dim)
        throw std::invalid_argument("tensor_preservation: form has the wrong dimension");
    for (const auto& row : omega)
        if (static_cast<int>(row.size()) != dim)
            throw std::invalid_argument("tensor_preservation: form is not square");
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            if (std::abs(omega[i][j] + omega[j][i]) > 1e-12)
                throw std::invalid_argument("tensor_preservation: form is not antisymmetric");
}

Expr form_entry(double v) {
    double r = std::nearbyint(v);
    if (r == v && std::abs(v) < 1e15) return Expr::integer(static_cast<std::int64_t>(r));
    return Expr::floating(v);
}

// d(iota_V omega) = 0: mixed partials of the contraction must agree
void require_hamiltonian(const Sds& x, const std::vector<std::vector<double>>& omega) {
    require_constant_form(x.chart, omega);
    int dim = x.chart.dim();
    std::vector<std::string> names = x.chart.coord_names();
    SampleDomain dom = x.chart.sample_domain();
    auto check = [&](const VectorField& v, const std::string& label) {
        std::vector<Expr> alpha(dim);
        for (int j = 0; j < dim; ++j)
            for (int i = 0; i < dim; ++i)
                if (omega[i][j] != 0.0) alpha[j] += v.comps[i] * form_entry(omega[i][j]);
        for (int j = 0; j < dim; ++j)
            for (int k = j + 1; k < dim; ++k) {
                Expr curl = alpha[j].differentiate(names[k]) - alpha[k].differentiate(names[j]);
                if (!is_zero(curl, dom).ok())
                    throw std::invalid_argument("tensor_preservation: " + label +
                                                " is not Hamiltonian for the given form");
            }
    };
    check(x.drift, "the drift field");
    for (std::size_t i = 0; i < x.noise.size(); ++i)
        check(x.noise[i], "noise field " + std::to_string(i + 1));
}

double form_value(const std::vector<std::vector<double>>& omega, const double* u,
                  const double* v, int dim) {
    double s = 0;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) s += u[i] * omega[i][j] * v[j];
    return s;
}

// deviation sweep with caller-supplied Brownian increments (steps x m)
TensorReport tensor_sweep(Stepper& st, const std::vector<std::vector<double>>& omega,
                          const std::vector<double>& x0, double dt,
                          const std::vector<std::vector<double>>& increments,
                          const std::vector<ProbePair>& probes) {
    int dim = st.dim;
    std::vector<double> base(probes.size());
    for (std::size_t q = 0; q < probes.size(); ++q) {
        if (static_cast<int>(probes[q].first.size()) != dim ||
            static_cast<int>(probes[q].second.size()) != dim)
            throw std::invalid_argument("tensor_preservation: probe has the wrong dimension");
        base[q] = form_value(omega, probes[q].first.data(), probes[q].second.data(), dim);
    }
    std::vector<double> xs = x0;
    std::vector<double> J = identity_matrix(dim);
    std::vector<double> jv(dim), jw(dim);
    TensorReport rep;
    for (const auto& db : increments) {
        if (!st.step(xs, J, dt, db.data()))
            throw std::runtime_error("tensor_preservation: trajectory diverged");
        ++rep.steps;
        for (std::size_t q = 0; q < probes.size(); ++q) {
            for (int i = 0; i < dim; ++i) {
                jv[i] = jw[i] = 0;
                for (int l = 0; l < dim; ++l) {
                    jv[i] += J[i * dim + l] * probes[q].first[l];
                    jw[i] += J[i * dim + l] * probes[q].second[l];
                }
            }
            double defect = std::abs(form_value(omega, jv.data(), jw.data(), dim) - base[q]);
            rep.max_deviation = std::max(rep.max_deviation, defect);
        }
    }
    return rep;
}

} // namespace

TensorReport tensor_preservation(const Sds& x, const std::vector<std::vector<double>>& omega,
                                 const std::vector<double>& x0, double dt, double horizon,
                                 const RngConfig& rng, std::uint64_t stream,
                                 const std::vector<ProbePair>& probes) {
    require_hamiltonian(x, omega);
    if (probes.empty()) throw std::invalid_argument("tensor_preservation: no probes");
    long long steps = step_count(dt, horizon);
    Stepper st(x, true, true);
    if (!st.in_domain(x0)) throw std::invalid_argument("tensor_preservation: x0 out of domain");
    NormalStream ns = trajectory_stream(rng, stream);
    std::vector<std::vector<double>> increments(steps, std::vector<double>(std::max(st.m, 1)));
    double sq = std::sqrt(dt);
    for (auto& row : increments)
        for (int j = 0; j < st.m; ++j) row[j] = sq * ns.normal();
    return tensor_sweep(st, omega, x0, dt, increments, probes);
}

TensorOrderStudy tensor_order_study(const Sds& x, const std::vector<std::vector<double>>& omega,
                                    const std::vector<double>& x0, double base_dt, int levels,
                                    double horizon, const RngConfig& rng, std::uint64_t stream,
                                    const std::vector<ProbePair>& probes) {
    if (levels < 2) throw std::invalid_argument("tensor_order_study: need at least two levels");
    require_hamiltonian(x, omega);
    if (probes.empty()) throw std::invalid_argument("tensor_order_study: no probes");
    long long coarse_steps = step_count(base_dt, horizon);
    if (coarse_steps < 1) throw std::invalid_argument("tensor_order_study: empty horizon");
    long long refine = 1LL << (levels - 1);
    long long fine_steps = coarse_steps * refine;
    double fine_dt = horizon / static_cast<double>(fine_steps);

    Stepper st(x, true, true);
    if (!st.in_domain(x0)) throw std::invalid_argument("tensor_order_study: x0 out of domain");
    NormalStream ns = trajectory_stream(rng, stream);
    int m = std::max(st.m, 1);
    std::vector<std::vector<double>> fine(fine_steps, std::vector<double>(m));
    double sq = std::sqrt(fine_dt);
    for (auto& row : fine)
        for (int j = 0; j < st.m; ++j) row[j] = sq * ns.normal();

    TensorOrderStudy study;
    for (int lvl = 0; lvl < levels; ++lvl) {
        long long group = refine >> lvl;  // fine steps per level step
        long long steps = fine_steps / group;
        double dt = horizon / static_cast<double>(steps);
        std::vector<std::vector<double>> incs(steps, std::vector<double>(m, 0.0));
        for (long long k = 0; k < fine_steps; ++k)
            for (int j = 0; j < st.m; ++j) incs[k / group][j] += fine[k][j];
        TensorReport rep = tensor_sweep(st, omega, x0, dt, incs, probes);
        study.dts.push_back(dt);
        study.deviations.push_back(rep.max_deviation);
    }
    double tm = 0, ym = 0;
    int n = levels;
    std::vector<double> ts(n), ys(n);
    for (int i = 0; i < n; ++i) {
        ts[i] = std::log2(study.dts[i]);
        ys[i] = std::log2(std::max(study.deviations[i], 1e-300));
        tm += ts[i];
        ym += ys[i];
    }
    tm /= n;
    ym /= n;
    double num = 0, den = 0;
    for (int i = 0; i < n; ++i) {
        num += (ts[i] - tm) * (ys[i] - ym);
        den += (ts[i] - tm) * (ts[i] - tm);
    }
    study.order = den > 0 ? num / den : 0.0;
    return study;
}

} // namespace sds
