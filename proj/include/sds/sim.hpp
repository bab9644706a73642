#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sds/geometry.hpp"

namespace sds {

// ---- deterministic parallel randomness -----------------------------------

// Per-trajectory streams derived counter-style from one master seed:
// stream i depends only on (master, i), so any execution schedule that
// reduces in trajectory-index order reproduces ensembles bit for bit.
struct RngConfig {
    std::uint64_t master = 0;
};

// Gaussian source over a splitmix64 state; Box-Muller with a cached spare.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : state_(seed) {}

    double uniform();  // in (0, 1]
    double normal();   // standard Gaussian

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

NormalStream trajectory_stream(const RngConfig& cfg, std::uint64_t index);

// ---- trajectories --------------------------------------------------------

// Recorded flow sample.  States are chart-ordered coordinate vectors stored
// every `stride` steps (first and final state always included, unless the
// path left its domain first).  With stride 1 the length is horizon/dt + 1.
// A path that exits a bounded coordinate or loses finiteness is cut at the
// last in-domain state and marked truncated.
struct Trajectory {
    Chart chart;
    double dt = 0.0;
    double horizon = 0.0;
    int stride = 1;
    std::uint64_t stream = 0;
    bool truncated = false;
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> jacobians;  // row-major dim*dim, aligned with states

    const std::vector<double>& last() const { return states.back(); }
};

struct IntegrateOptions {
    bool wrap_periodic = true;   // wrap periodic coordinates into [0, period)
    bool with_jacobian = false;  // evolve dJ = DX0 J dt + sum DXi J o dB alongside
    int stride = 1;              // record every stride-th step
};

// Stratonovich Heun: predictor with frozen coefficients, trapezoidal
// corrector, dB ~ N(0, dt) per step and noise index.
Trajectory integrate(const Sds& x, const std::vector<double>& x0, double dt, double horizon,
                     const RngConfig& rng, std::uint64_t stream,
                     const IntegrateOptions& opts = {});

// ---- ensembles -----------------------------------------------------------

struct SampleSet {
    std::vector<double> values;
    std::size_t truncated = 0;  // paths dropped before the latest sample time
};

// g along each path at the listed times (snapped to whole steps), one
// SampleSet per time; truncated paths are excluded from every set.
std::vector<SampleSet> sampled_observable(const Sds& x, const std::vector<double>& x0,
                                          const Expr& g, double dt,
                                          const std::vector<double>& times, int paths,
                                          const RngConfig& rng);

SampleSet terminal_samples(const Sds& x, const std::vector<double>& x0, const Expr& g, double dt,
                           double horizon, int paths, const RngConfig& rng);

struct EnsembleStats {
    std::size_t n = 0;          // requested paths
    std::size_t truncated = 0;  // dropped paths; counts sum to n - truncated
    double mean = 0.0;
    double variance = 0.0;   // unbiased sample variance
    double std_error = 0.0;  // sqrt(variance / kept)
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::vector<double> values;  // the retained samples (KS input)
};

EnsembleStats summarize(std::vector<double> values, std::size_t truncated, double lo, double hi,
                        int bins);

// ---- generator estimation ------------------------------------------------

struct GeneratorEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double step = 0.0;  // internal integration step (t / 20)
    std::size_t paths = 0;
    std::size_t truncated = 0;
};

// Monte Carlo (E[f(x_t)] - f(x)) / t.  Throws on t <= 0, fewer than 100
// paths, or a truncated majority.
GeneratorEstimate empirical_generator(const Sds& x, const Expr& f, const std::vector<double>& x0,
                                      double t, int paths, const RngConfig& rng);

// ---- stationary densities ------------------------------------------------

struct StationaryDensityOptions {
    double lo = 0.05;
    double hi = 3.0;
    int bins = 30;
    double dt = 2e-3;
    double burn_in = 10.0;
    double horizon = 510.0;  // per path, burn-in included
    int paths = 2000;
};

struct StationaryDensityReport {
    std::vector<double> edges;      // bins + 1
    std::vector<double> empirical;  // per-bin densities
    std::vector<double> oracle;     // bin averages of the closed-form density
    std::vector<double> z;          // informational; correlation-inflated scale
    double sup_distance = 0.0;      // max |empirical - oracle| over bins
    double mean = 0.0;              // over all post-burn-in samples
    double median = 0.0;            // histogram CDF interpolation
    double mode = 0.0;              // parabolic fit around the peak bin
    double oracle_mass = 0.0;       // re-quadrature of the normalized oracle
    std::size_t samples = 0;        // in-range post-burn-in samples
};

// One-dimensional chart only.  The oracle solves the stationary equation
// p proportional to exp(int 2 mu / sigma^2) / sigma^2 on a fine grid with
// composite quadrature; sigma^2 = sum of squared noise coefficients must
// stay positive on [lo, hi].  Throws when the two post-burn-in halves
// disagree or the range captures under half of the samples (nonstationary),
// and on a truncated majority.  z uses an effective-sample correction with
// correlation time 1.0, so it is a scale indicator, not a sharp test.
StationaryDensityReport stationary_density_1d(const Sds& x, double x0,
                                              const StationaryDensityOptions& opts,
                                              const RngConfig& rng);

// Same report, but the empirical side harvests `observable` along paths of
// `sampler` (any chart) while the closed-form oracle comes from the 1-D
// `oracle` system.  This keeps boundary-hugging reduced systems honest: an
// explicit fixed-step chain on a half-line with a 1/r drift reaches the
// boundary at an O(1)-per-unit-time rate no matter how small dt is, so when
// a nonsingular representative exists (full-plane system pushed through the
// radius), sample that instead.
StationaryDensityReport stationary_density_1d(const Sds& sampler, const Expr& observable,
                                              const std::vector<double>& x0, const Sds& oracle,
                                              const StationaryDensityOptions& opts,
                                              const RngConfig& rng);

// ---- martingale window test ----------------------------------------------

struct MartingaleReport {
    std::vector<double> window_z;  // mean of windowed (theta - t) increments / stderr
    double mean_frequency = 0.0;   // mean of (theta(T) - theta(0)) / T
    double frequency_std_error = 0.0;
    double max_step = 0.0;  // largest |delta theta| between consecutive samples

    bool pass() const;  // every |z| < 3
};

// theta: per-path samples of the unwrapped angle on a uniform grid of
// spacing dt (integrate with wrap_periodic = false).  Throws on fewer than
// 30 paths, ragged input, or a sample-to-sample jump of pi or more.
MartingaleReport martingale_test(const std::vector<std::vector<double>>& theta, double dt,
                                 int windows = 10);

// atan2(x[iy], x[ix]) accumulated on the real line by nearest-branch
// continuation at every integration step, one series per path.  Samples at
// full step resolution so consecutive increments stay below pi; memory is
// paths * (steps + 1) doubles.  Throws if a path truncates.
std::vector<std::vector<double>> angle_series(const Sds& x, const std::vector<double>& x0,
                                              int ix, int iy, double dt, double horizon,
                                              int paths, const RngConfig& rng);

// ---- two-sample Kolmogorov-Smirnov ---------------------------------------

struct KsReport {
    double statistic = 0.0;
    double threshold = 0.0;  // 1.628 sqrt((na+nb)/(na nb)), the 1% critical value
    std::size_t na = 0, nb = 0;

    bool pass() const { return statistic < threshold; }
};

KsReport ks_compare(std::vector<double> a, std::vector<double> b);

// ---- pathwise tensor preservation ----------------------------------------

using ProbePair = std::pair<std::vector<double>, std::vector<double>>;

struct TensorReport {
    double max_deviation = 0.0;  // over steps and probes, |w(Jv, Jw) - w(v, w)|
    std::size_t steps = 0;
};

// Requires a constant antisymmetric form and symbolically Hamiltonian
// fields: for each field of x, the contraction with the form must be
// closed (mixed partials agree).  Throws otherwise, naming the field.
TensorReport tensor_preservation(const Sds& x, const std::vector<std::vector<double>>& omega,
                                 const std::vector<double>& x0, double dt, double horizon,
                                 const RngConfig& rng, std::uint64_t stream,
                                 const std::vector<ProbePair>& probes);

struct TensorOrderStudy {
    std::vector<double> dts;         // coarsest first, halved per level
    std::vector<double> deviations;  // max deviation per level, common noise path
    double order = 0.0;              // least-squares slope of log2 dev vs log2 dt
};

// Runs `levels` step sizes from base_dt downward over one Brownian path
// (finest-level increments aggregated for coarser levels) so the deviation
// ratios isolate the scheme order.
TensorOrderStudy tensor_order_study(const Sds& x, const std::vector<std::vector<double>>& omega,
                                    const std::vector<double>& x0, double base_dt, int levels,
                                    double horizon, const RngConfig& rng, std::uint64_t stream,
                                    const std::vector<ProbePair>& probes);

} // namespace sds
