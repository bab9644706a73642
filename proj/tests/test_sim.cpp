#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "sds/reduction.hpp"
#include "sds/sim.hpp"

using namespace sds;

namespace {

constexpr double k_pi = 3.14159265358979323846;

// dx = x dt: exact flow e^t, the deterministic probe for generator bias
Sds exponential_flow() {
    Chart c = euclidean_chart(1);
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[0] = Expr::symbol("x1");
    return s;
}

// dr = -r dt + dB: stationary law Normal(0, 1/2)
Sds ornstein_uhlenbeck() {
    Chart c = euclidean_chart(1);
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[0] = -Expr::symbol("x1");
    VectorField b = VectorField::zero(c);
    b.comps[0] = Expr::integer(1);
    s.noise.push_back(b);
    return s;
}

// the radial reduction of the unit damped oscillator: dr = (1/(2r) - r)dt + dB
Sds reduced_oscillator() {
    Chart c = half_line_chart("r");
    Expr r = Expr::symbol("r");
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[0] = Expr::integer(1) / (Expr::integer(2) * r) - r;
    VectorField b = VectorField::zero(c);
    b.comps[0] = Expr::integer(1);
    s.noise.push_back(b);
    return s;
}

Sds planar_rotation() {
    Chart c = plane_chart();
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[0] = -Expr::symbol("y");
    s.drift.comps[1] = Expr::symbol("x");
    return s;
}

// rotation drift with the Hamiltonian noise field of g = x^2/2
Sds hamiltonian_noisy_rotation() {
    Sds s = planar_rotation();
    VectorField b = VectorField::zero(s.chart);
    b.comps[1] = -Expr::symbol("x");
    s.noise.push_back(b);
    return s;
}

std::vector<std::vector<double>> standard_form() { return {{0.0, 1.0}, {-1.0, 0.0}}; }

std::vector<ProbePair> standard_probes() {
    return {{{1.0, 0.0}, {0.0, 1.0}}, {{0.7, -0.4}, {0.25, 1.1}}};
}

int coord_index(const Chart& c, const std::string& name) {
    int idx = c.index_of(name);
    REQUIRE(idx >= 0);
    return idx;
}

} // namespace

TEST_CASE("streams are reproducible, index-separated, and produce (0,1] uniforms") {
    RngConfig cfg{42};
    NormalStream a = trajectory_stream(cfg, 7);
    NormalStream b = trajectory_stream(cfg, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
    NormalStream c = trajectory_stream(cfg, 8);
    NormalStream d = trajectory_stream(RngConfig{43}, 7);
    NormalStream e = trajectory_stream(cfg, 7);
    bool index_differs = false, master_differs = false;
    for (int i = 0; i < 16; ++i) {
        double x = e.normal();
        if (x != c.normal()) index_differs = true;
        if (x != d.normal()) master_differs = true;
    }
    CHECK(index_differs);
    CHECK(master_differs);
    NormalStream u = trajectory_stream(cfg, 0);
    double lo = 1, hi = 0, acc = 0;
    for (int i = 0; i < 20000; ++i) {
        double x = u.uniform();
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        acc += x;
    }
    CHECK(lo > 0.0);
    CHECK(hi <= 1.0);
    CHECK(acc / 20000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("Heun is exact on a constant field and keeps the length invariant") {
    Chart c = euclidean_chart(1);
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[0] = Expr::integer(1);
    double dt = 1.0 / 1024;
    Trajectory t = integrate(s, {0.0}, dt, 1.0, RngConfig{1}, 0);
    CHECK(t.states.size() == 1025);
    CHECK_FALSE(t.truncated);
    CHECK(t.last()[0] == 1.0);  // every step adds exactly dt
    CHECK_THROWS_AS(integrate(s, {0.0}, 0.0, 1.0, RngConfig{1}, 0), std::invalid_argument);
    CHECK_THROWS_AS(integrate(s, {0.0}, -1e-3, 1.0, RngConfig{1}, 0), std::invalid_argument);
}

TEST_CASE("deterministic rotation closes its orbit and transports the Jacobian") {
    Sds s = planar_rotation();
    IntegrateOptions opts;
    opts.with_jacobian = true;
    opts.stride = 1000;
    Trajectory t = integrate(s, {1.0, 0.0}, 1e-4, 2 * k_pi, RngConfig{0}, 0, opts);
    CHECK_FALSE(t.truncated);
    double err = std::hypot(t.last()[0] - 1.0, t.last()[1] - 0.0);
    CHECK(err < 1e-4);
    // the variational flow of a linear field equals the flow's own matrix
    const std::vector<double>& J = t.jacobians.back();
    CHECK(J[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(J[1] == doctest::Approx(0.0).scale(1).epsilon(1e-4));
    CHECK(J[2] == doctest::Approx(0.0).scale(1).epsilon(1e-4));
    CHECK(J[3] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(t.jacobians.size() == t.states.size());
}

TEST_CASE("Brownian endpoint variance matches the Gaussian law") {
    Sds w = brownian(1);
    SampleSet end = terminal_samples(w, {0.0}, Expr::symbol("x1"), 1e-3, 1.0, 10000, RngConfig{11});
    CHECK(end.truncated == 0);
    EnsembleStats stats = summarize(end.values, end.truncated, -4.0, 4.0, 40);
    CHECK(stats.n == 10000);
    std::size_t total = 0;
    for (auto c : stats.counts) total += c;
    CHECK(total == stats.n - stats.truncated);  // nothing at |x| >= 4 this seed
    double var_se = std::sqrt(2.0 / 9999.0);    // sd of a variance estimate, Gaussian data
    CHECK(std::abs(stats.variance - 1.0) < 3 * var_se);
    CHECK(std::abs(stats.mean) < 3 * stats.std_error);
}

TEST_CASE("identical configurations give bit-identical ensembles in any order") {
    Sds w = brownian(2);
    Expr g = Expr::symbol("x1") + Expr::symbol("x2");
    SampleSet fwd = terminal_samples(w, {0.0, 0.0}, g, 1e-2, 0.5, 64, RngConfig{5});
    // same ensemble, paths executed in reverse index order
    std::vector<double> rev(64);
    for (int p = 63; p >= 0; --p) {
        Trajectory t = integrate(w, {0.0, 0.0}, 1e-2, 0.5, RngConfig{5}, p);
        rev[p] = t.last()[0] + t.last()[1];
    }
    REQUIRE(fwd.values.size() == 64);
    for (int p = 0; p < 64; ++p) CHECK(fwd.values[p] == rev[p]);
}

TEST_CASE("paths leaving a bounded coordinate are truncated at first exit") {
    Chart c = half_line_chart("r");
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[0] = Expr::integer(-10);
    Trajectory t = integrate(s, {0.5}, 1e-3, 1.0, RngConfig{3}, 0);
    CHECK(t.truncated);
    CHECK(t.states.size() < 1001);
    for (const auto& state : t.states) CHECK(state[0] > 0.0);
    CHECK_THROWS_AS(integrate(s, {-0.5}, 1e-3, 1.0, RngConfig{3}, 0), std::invalid_argument);
}

TEST_CASE("periodic coordinates wrap unless unwrapped tracking is requested") {
    Sds s = brownian_polar();
    s.drift.comps[0] = Expr::integer(1);  // steady angular advance
    s.noise.clear();
    int ith = coord_index(s.chart, "theta");
    Trajectory wrapped = integrate(s, {0.0, 1.0}, 1e-2, 20.0, RngConfig{0}, 0);
    for (const auto& state : wrapped.states) {
        CHECK(state[ith] >= 0.0);
        CHECK(state[ith] < 2 * k_pi + 1e-12);
    }
    IntegrateOptions opts;
    opts.wrap_periodic = false;
    Trajectory open = integrate(s, {0.0, 1.0}, 1e-2, 20.0, RngConfig{0}, 0, opts);
    CHECK(open.last()[ith] == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("empirical generator brackets symbolic values") {
    SUBCASE("planar Brownian motion, squared radius") {
        Sds w = brownian(2);
        Expr f = Expr::symbol("x1") * Expr::symbol("x1") + Expr::symbol("x2") * Expr::symbol("x2");
        std::vector<double> x0 = {1.0, 1.0};
        GeneratorEstimate est = empirical_generator(w, f, x0, 1e-3, 40000, RngConfig{17});
        double symbolic = generator(w).apply(f).eval({{"x1", 1.0}, {"x2", 1.0}});
        CHECK(symbolic == 2.0);
        CHECK(std::abs(est.estimate - symbolic) < 3 * est.std_error + 5.0 * 1e-3);
    }
    SUBCASE("Bessel drift at unit radius") {
        Sds b = bessel(3);
        GeneratorEstimate est =
            empirical_generator(b, Expr::symbol("r"), {1.0}, 1e-3, 40000, RngConfig{19});
        double symbolic = generator(b).apply(Expr::symbol("r")).eval({{"r", 1.0}});
        CHECK(symbolic == 1.0);
        CHECK(std::abs(est.estimate - symbolic) < 3 * est.std_error + 5.0 * 1e-3);
    }
    SUBCASE("constant observables have a zero estimate") {
        Sds w = brownian(1);
        GeneratorEstimate est =
            empirical_generator(w, Expr::integer(4), {0.0}, 1e-3, 200, RngConfig{23});
        CHECK(est.estimate == 0.0);
        CHECK(est.std_error == 0.0);
    }
    SUBCASE("preconditions") {
        Sds w = brownian(1);
        CHECK_THROWS_AS(empirical_generator(w, Expr::symbol("x1"), {0.0}, 0.0, 200, RngConfig{0}),
                        std::invalid_argument);
        CHECK_THROWS_AS(empirical_generator(w, Expr::symbol("x1"), {0.0}, 1e-3, 50, RngConfig{0}),
                        std::invalid_argument);
    }
}

TEST_CASE("generator bias halves with t on the deterministic exponential flow") {
    Sds s = exponential_flow();
    Expr f = Expr::symbol("x1");
    // exact flow: estimate = (e^t - 1)/t, so the bias is t/2 + O(t^2)
    std::vector<double> biases;
    for (double t : {4e-3, 2e-3, 1e-3}) {
        GeneratorEstimate est = empirical_generator(s, f, {1.0}, t, 100, RngConfig{29});
        biases.push_back(std::abs(est.estimate - 1.0));
    }
    CHECK(biases[0] / biases[1] >= 1.8);
    CHECK(biases[1] / biases[2] >= 1.8);
    CHECK(biases[0] / biases[1] <= 2.2);
}

TEST_CASE("a truncated majority is an error") {
    Chart c = half_line_chart("r");
    Sds s;
    s.chart = c;
    s.drift = VectorField::zero(c);
    s.drift.comps[0] = Expr::integer(-100);
    VectorField b = VectorField::zero(c);
    b.comps[0] = Expr::integer(1);
    s.noise.push_back(b);
    CHECK_THROWS_AS(empirical_generator(s, Expr::symbol("r"), {0.05}, 0.1, 200, RngConfig{31}),
                    std::runtime_error);
}

TEST_CASE("Ornstein-Uhlenbeck stationary density matches the Gaussian closed form") {
    StationaryDensityOptions opts;
    opts.lo = -2.5;
    opts.hi = 2.5;
    opts.bins = 25;
    opts.dt = 2e-3;
    opts.burn_in = 5.0;
    opts.horizon = 60.0;
    opts.paths = 400;
    StationaryDensityReport rep = stationary_density_1d(ornstein_uhlenbeck(), 0.0, opts, RngConfig{37});
    CHECK(rep.oracle_mass == doctest::Approx(1.0).epsilon(1e-3));
    // quadrature oracle vs the exact Normal(0, 1/2) bin masses
    double norm = std::erf(2.5);
    for (int b = 0; b < opts.bins; ++b) {
        double lo = rep.edges[b], hi = rep.edges[b + 1];
        double exact = (std::erf(hi) - std::erf(lo)) / (2.0 * norm) / (hi - lo);
        CHECK(std::abs(rep.oracle[b] - exact) < 1e-6);
    }
    CHECK(rep.sup_distance < 0.08);
    CHECK(std::abs(rep.mean) < 0.03);
    CHECK(std::abs(rep.median) < 0.05);
    CHECK(std::abs(rep.mode) < 0.15);
}

TEST_CASE("reduced oscillator density matches the Rayleigh-type closed form") {
    // the reduced chain reaches r = 0 at an O(1) rate per unit time, so the
    // harvest runs on the plane representative pushed through the radius
    StationaryDensityOptions opts;
    opts.paths = 300;
    opts.horizon = 180.0;
    Expr radius = sqrt(Expr::symbol("x") * Expr::symbol("x") + Expr::symbol("y") * Expr::symbol("y"));
    StationaryDensityReport rep =
        stationary_density_1d(damped_oscillator(Expr::integer(1)), radius, {1.0, 0.0},
                              reduced_oscillator(), opts, RngConfig{41});
    // oracle vs p(r) = 2 r e^{-r^2}, bin masses e^{-a^2} - e^{-b^2}, range-normalized
    double mass_range = std::exp(-opts.lo * opts.lo) - std::exp(-opts.hi * opts.hi);
    for (int b = 0; b < opts.bins; ++b) {
        double a = rep.edges[b], c = rep.edges[b + 1];
        double exact = (std::exp(-a * a) - std::exp(-c * c)) / mass_range / (c - a);
        // the trapezoid accumulation of the 1/r exponent term caps the grid
        // accuracy near the left edge
        CHECK(std::abs(rep.oracle[b] - exact) < 5e-6);
    }
    CHECK(rep.oracle_mass == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(rep.sup_distance < 0.05);
    CHECK(rep.mean == doctest::Approx(std::sqrt(k_pi / 4)).epsilon(0.025));
    CHECK(rep.median == doctest::Approx(std::sqrt(std::log(2.0))).epsilon(0.03));
    CHECK(rep.mode == doctest::Approx(std::sqrt(0.5)).epsilon(0.15));
}

TEST_CASE("stationary density rejects bad inputs and nonstationary systems") {
    StationaryDensityOptions opts;
    CHECK_THROWS_AS(stationary_density_1d(brownian(2), 0.0, opts, RngConfig{0}),
                    std::invalid_argument);
    // no noise on the range
    Chart c = half_line_chart("r");
    Sds dead;
    dead.chart = c;
    dead.drift = VectorField::zero(c);
    dead.drift.comps[0] = -Expr::symbol("r");
    CHECK_THROWS_AS(stationary_density_1d(dead, 1.0, opts, RngConfig{0}), std::invalid_argument);
    // exponential growth escapes the range: the coverage check trips
    Chart e = euclidean_chart(1);
    Sds grow;
    grow.chart = e;
    grow.drift = VectorField::zero(e);
    grow.drift.comps[0] = Expr::symbol("x1");
    VectorField b = VectorField::zero(e);
    b.comps[0] = Expr::integer(1);
    grow.noise.push_back(b);
    StationaryDensityOptions small;
    small.lo = -3.0;
    small.hi = 3.0;
    small.bins = 12;
    small.burn_in = 2.0;
    small.horizon = 20.0;
    small.paths = 50;
    CHECK_THROWS_AS(stationary_density_1d(grow, 1.0, small, RngConfig{43}), std::runtime_error);
}

TEST_CASE("unit damped oscillator angle is a compensated martingale") {
    // plane simulation with nearest-branch unwrapping; the polar chart would
    // lose paths to the r = 0 boundary
    Sds s = damped_oscillator(Expr::integer(1));
    int ix = coord_index(s.chart, "x");
    int iy = coord_index(s.chart, "y");
    std::vector<std::vector<double>> series =
        angle_series(s, {1.0, 0.0}, ix, iy, 1e-3, 30.0, 300, RngConfig{47});
    MartingaleReport rep = martingale_test(series, 1e-3);
    CHECK(rep.window_z.size() == 10);
    CHECK(rep.pass());
    CHECK(rep.max_step < k_pi);
    CHECK(rep.mean_frequency == doctest::Approx(1.0).epsilon(0.05));
    CHECK(rep.frequency_std_error < 0.05);
}

TEST_CASE("angular drift bias is detected by the window test") {
    Sds s = damped_oscillator(Expr::integer(1));
    int ix = coord_index(s.chart, "x");
    int iy = coord_index(s.chart, "y");
    Expr gain = Expr::rational(Rational(3, 10));  // 0.3 extra turns per unit time
    s.drift.comps[ix] -= gain * Expr::symbol("y");
    s.drift.comps[iy] += gain * Expr::symbol("x");
    std::vector<std::vector<double>> series =
        angle_series(s, {1.0, 0.0}, ix, iy, 1e-3, 30.0, 300, RngConfig{53});
    MartingaleReport rep = martingale_test(series, 1e-3);
    CHECK_FALSE(rep.pass());
    double zmax = 0;
    for (double z : rep.window_z) zmax = std::max(zmax, z);
    CHECK(zmax > 3.0);
    CHECK(rep.mean_frequency == doctest::Approx(1.3).epsilon(0.05));
}

TEST_CASE("noise-free rotation angles unwrap to an exact linear series") {
    std::vector<std::vector<double>> series =
        angle_series(planar_rotation(), {1.0, 0.0}, 0, 1, 1e-3, 1.0, 30, RngConfig{0});
    MartingaleReport rep = martingale_test(series, 1e-3);
    for (double z : rep.window_z) CHECK(z == 0.0);  // all paths identical
    CHECK(rep.mean_frequency == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rep.pass());
    CHECK_THROWS_AS(angle_series(planar_rotation(), {1.0, 0.0}, 0, 0, 1e-3, 1.0, 30, RngConfig{0}),
                    std::invalid_argument);
}

TEST_CASE("noise-free rotation gives identically zero z-scores") {
    std::vector<std::vector<double>> series(40);
    for (auto& path : series) {
        path.resize(101);
        for (int k = 0; k <= 100; ++k) path[k] = 0.01 * k;
    }
    MartingaleReport rep = martingale_test(series, 0.01);
    for (double z : rep.window_z) CHECK(z == 0.0);
    CHECK(rep.mean_frequency == doctest::Approx(1.0));
    CHECK(rep.pass());
}

TEST_CASE("martingale preconditions and the angle-jump guard") {
    std::vector<std::vector<double>> tiny(10, std::vector<double>(11, 0.0));
    CHECK_THROWS_AS(martingale_test(tiny, 0.1), std::invalid_argument);
    std::vector<std::vector<double>> jumpy(40, std::vector<double>(11, 0.0));
    jumpy[7][5] = 4.0;  // a jump past pi
    CHECK_THROWS_AS(martingale_test(jumpy, 0.1), std::runtime_error);
    std::vector<std::vector<double>> ragged(40, std::vector<double>(11, 0.0));
    ragged[3].pop_back();
    CHECK_THROWS_AS(martingale_test(ragged, 0.1), std::invalid_argument);
}

TEST_CASE("two-sample KS statistic and threshold behave as a distribution test") {
    SUBCASE("identical samples give statistic zero") {
        std::vector<double> a = {0.3, -1.2, 0.8, 2.1, -0.4};
        KsReport rep = ks_compare(a, a);
        CHECK(rep.statistic == 0.0);
        CHECK(rep.pass());
    }
    SUBCASE("same law, independent seeds") {
        NormalStream s1 = trajectory_stream(RngConfig{61}, 0);
        NormalStream s2 = trajectory_stream(RngConfig{67}, 0);
        std::vector<double> a, b;
        for (int i = 0; i < 3000; ++i) {
            a.push_back(s1.normal());
            b.push_back(s2.normal());
        }
        KsReport rep = ks_compare(a, b);
        CHECK(rep.pass());
        CHECK(rep.threshold == doctest::Approx(1.628 * std::sqrt(2.0 / 3000.0)));
    }
    SUBCASE("a 0.3 location shift at n = 3000 is detected") {
        NormalStream s1 = trajectory_stream(RngConfig{71}, 0);
        NormalStream s2 = trajectory_stream(RngConfig{73}, 0);
        std::vector<double> a, b;
        for (int i = 0; i < 3000; ++i) {
            a.push_back(s1.normal());
            b.push_back(s2.normal() + 0.3);
        }
        CHECK_FALSE(ks_compare(a, b).pass());
    }
    SUBCASE("empty samples are rejected") {
        CHECK_THROWS_AS(ks_compare({}, {1.0}), std::invalid_argument);
    }
}

TEST_CASE("the radial norm of planar Brownian motion is the Bessel process in law") {
    // matched unit starts; the laws coincide under the radial projection
    Sds w3 = brownian(3);
    Expr norm = sqrt(Expr::symbol("x1") * Expr::symbol("x1") +
                     Expr::symbol("x2") * Expr::symbol("x2") +
                     Expr::symbol("x3") * Expr::symbol("x3"));
    SampleSet full = terminal_samples(w3, {1.0, 0.0, 0.0}, norm, 1e-3, 1.0, 4000, RngConfig{79});
    SampleSet radial =
        terminal_samples(bessel(3), {1.0}, Expr::symbol("r"), 1e-3, 1.0, 4000, RngConfig{83});
    CHECK(full.truncated == 0);
    KsReport same = ks_compare(full.values, radial.values);
    CHECK(same.pass());

    SampleSet other =
        terminal_samples(bessel(4), {1.0}, Expr::symbol("r"), 1e-3, 1.0, 4000, RngConfig{89});
    KsReport different = ks_compare(full.values, other.values);
    CHECK_FALSE(different.pass());
}

TEST_CASE("pushing oscillator paths through the radius is a diffusion morphism in law") {
    // reduced-side reference drawn from the exact transition law (the radius
    // of a 2-D linear SDS is a scaled noncentral chi with two degrees of
    // freedom); integrating the reduced half-line system would censor the
    // low-radius tail through boundary truncation
    Sds plane = damped_oscillator(Expr::integer(1));
    Expr radius = sqrt(Expr::symbol("x") * Expr::symbol("x") + Expr::symbol("y") * Expr::symbol("y"));
    std::vector<double> times = {0.5, 1.0, 2.0};
    std::vector<SampleSet> pushed =
        sampled_observable(plane, {1.0, 0.0}, radius, 1e-3, times, 3000, RngConfig{97});
    NormalStream ref = trajectory_stream(RngConfig{101}, 0);
    for (std::size_t i = 0; i < times.size(); ++i) {
        CAPTURE(times[i]);
        CHECK(pushed[i].truncated == 0);
        double m = std::exp(-times[i]);
        double sd = std::sqrt((1.0 - std::exp(-2.0 * times[i])) / 2.0);
        std::vector<double> exact(3000);
        for (double& v : exact) v = std::hypot(m + sd * ref.normal(), sd * ref.normal());
        KsReport rep = ks_compare(pushed[i].values, exact);
        CHECK(rep.pass());
    }
}

TEST_CASE("deterministic harmonic flow preserves the symplectic form to scheme accuracy") {
    TensorReport rep = tensor_preservation(planar_rotation(), standard_form(), {1.0, 0.0}, 1e-4,
                                           10.0, RngConfig{0}, 0, standard_probes());
    CHECK(rep.steps == 100000);
    CHECK(rep.max_deviation < 1e-8);
}

TEST_CASE("stochastic Hamiltonian flow preserves the form at first order in dt") {
    TensorOrderStudy study = tensor_order_study(hamiltonian_noisy_rotation(), standard_form(),
                                                {1.0, 0.0}, 4e-3, 4, 5.0, RngConfig{103}, 0,
                                                standard_probes());
    REQUIRE(study.dts.size() == 4);
    CHECK(study.dts[0] == doctest::Approx(4e-3));
    CHECK(study.dts[3] == doctest::Approx(5e-4));
    for (int i = 1; i < 4; ++i) CHECK(study.deviations[i] < study.deviations[i - 1]);
    CHECK(study.order >= 0.9);
}

TEST_CASE("non-Hamiltonian fields are rejected symbolically") {
    Sds damped = planar_rotation();
    damped.drift.comps[0] -= Expr::symbol("x");
    damped.drift.comps[1] -= Expr::symbol("y");
    CHECK_THROWS_WITH_AS(tensor_preservation(damped, standard_form(), {1.0, 0.0}, 1e-3, 1.0,
                                             RngConfig{0}, 0, standard_probes()),
                         doctest::Contains("drift"), std::invalid_argument);
    Sds noisy = planar_rotation();
    VectorField bad = VectorField::zero(noisy.chart);
    bad.comps[0] = -Expr::symbol("x");
    bad.comps[1] = -Expr::symbol("y");
    noisy.noise.push_back(bad);
    CHECK_THROWS_WITH_AS(tensor_preservation(noisy, standard_form(), {1.0, 0.0}, 1e-3, 1.0,
                                             RngConfig{0}, 0, standard_probes()),
                         doctest::Contains("noise field 1"), std::invalid_argument);
    std::vector<std::vector<double>> lopsided = {{0.0, 1.0}, {1.0, 0.0}};
    CHECK_THROWS_AS(tensor_preservation(planar_rotation(), lopsided, {1.0, 0.0}, 1e-3, 1.0,
                                        RngConfig{0}, 0, standard_probes()),
                    std::invalid_argument);
}
