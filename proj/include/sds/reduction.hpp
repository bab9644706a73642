#pragma once

#include <optional>

#include "sds/diffop.hpp"

namespace sds {

// Surjective map between charts: one expression per target coordinate, over
// the source coordinates.  An optional global section goes the other way
// (one expression per source coordinate, over the target coordinates) and
// enables symbolic rewriting of projected coefficients; composing the
// components with the section must give the identity on the target.
struct QuotientMap {
    Chart source;
    Chart target;
    std::vector<Expr> components;
    std::vector<Expr> section;

    bool has_section() const { return !section.empty(); }
    std::map<std::string, double> forward(const std::map<std::string, double>& x) const;
    std::map<std::string, double> section_point(const std::map<std::string, double>& u) const;
};

struct SubmersionReport {
    int min_rank = 0;
    int samples_used = 0;
    bool full_rank = false;
    std::map<std::string, double> witness;  // point achieving the minimal rank
};

SubmersionReport submersion_check(const QuotientMap& phi, int samples = 16,
                                  std::uint64_t seed = 0x5ab8e2ULL);

// Strict invariance: every system field commutes with every action generator.
struct InvarianceReport {
    std::vector<std::vector<ZeroVerdict>> verdicts;  // [generator][field], field 0 = drift
    bool ok() const;
    bool symbolic() const;
};

InvarianceReport strict_invariance(const Sds& x, const GroupAction& g,
                                   const ZeroTestOptions& opts = {});

// Diffusion invariance: every action generator commutes with the diffusion
// generator as an operator.
struct DiffusionInvarianceReport {
    std::vector<ZeroVerdict> verdicts;  // per action generator
    bool ok() const;
    bool symbolic() const;
};

DiffusionInvarianceReport diffusion_invariance(const Sds& x, const GroupAction& g,
                                               const ZeroTestOptions& opts = {});

// Two source points on one fiber separated by some projected quantity.
struct FiberPair {
    std::map<std::string, double> x, y;
    double separation = 0.0;
    std::string quantity;
};

struct ProjectionReport {
    DiffOp reduced;     // on the target chart; meaningful when ok and symbolic_form
    bool ok = false;
    bool symbolic_form = false;  // coefficients were rewritten through the section
    ZeroVerdict rewrite;         // merged rewrite verdicts
    std::vector<FiberPair> witnesses;
};

// Projects a generator-shaped operator through the map: first-order target
// coefficients are A(Phi^j), second-order ones come from the squared-field
// form A(Phi^j Phi^k) - Phi^j A(Phi^k) - Phi^k A(Phi^j).  With a section the
// coefficients are rewritten symbolically and the rewrite is verified by a
// zero test on the source chart; without one, fiber constancy is checked
// numerically at sampled fiber pairs.  Failure carries witness pairs.
ProjectionReport project_generator(const DiffOp& a, const QuotientMap& phi,
                                   int samples = 16, const ZeroTestOptions& opts = {});

// Turns a generator-shaped operator back into an SDS: noise fields from a
// symbolic square root of twice the order-2 matrix (componentwise for a
// diagonal matrix, symbolic Cholesky otherwise), then the drift absorbs the
// correction: Y_0 = A - 1/2 sum Y_i Y_i.  Purely numeric square roots are
// refused; the output must stay symbolic.
Sds realize_sds(const DiffOp& a);

enum class ProjectabilityMode { Strict, Diffusion, Deterministic };

struct ProjectabilityReport {
    ProjectabilityMode mode = ProjectabilityMode::Strict;
    bool pass = false;
    int pairs_tested = 0;
    double max_defect = 0.0;
    std::optional<FiberPair> witness;
};

// Samples pairs of points on common fibers and compares, per mode: the
// pushforwards of every field (strict), the projected generator data
// (diffusion), or the pushforward of the drift alone (deterministic, which
// requires a noiseless system).  A map whose differential already has full
// source rank has point fibers and passes vacuously.
ProjectabilityReport projectability_check(const Sds& x, const QuotientMap& phi,
                                          ProjectabilityMode mode, int samples = 16);

struct RadialAngularSplit {
    Sds radial;   // fields proportional to the bounded coordinate direction
    Sds angular;  // fields proportional to the periodic coordinate direction
};

// Splits a rotation-invariant SDS on a (periodic, bounded) 2-D chart into
// commuting radial and angular systems whose generators sum to the full
// generator.  Requires the generator's coefficients to be independent of the
// angle and its mixed second-order coefficient to vanish.
RadialAngularSplit radial_angular_decompose(const Sds& x, const ZeroTestOptions& opts = {});

// Stock charts, systems, actions, and maps used across the test corpus.
Chart euclidean_chart(int n);                   // x1..xn, unconstrained
Chart plane_chart();                            // (x, y)
Chart half_line_chart(const std::string& coord);
Chart polar_chart();                            // (theta mod 2pi, r > 0)
Chart torus_chart(int n);                       // theta1..thetan, period 1

Sds brownian(int n);
GroupAction translation_action(int n);
GroupAction so_n_action(int n);
Sds bessel(int n);

// Damped oscillator on the plane: rotation drift, inward damping -f(r) along
// the radius, unit noise in both coordinates.  f is an expression in the
// symbol "r" and is composed with sqrt(x^2+y^2) internally.
Sds damped_oscillator(const Expr& f_of_r);

// The same system written in the polar chart (exact coordinate change).
Sds damped_oscillator_polar(const Expr& f_of_r);
Sds brownian_polar();

// Hamiltonian system on R^{2n}: rotation drift in every (x_i, y_i) plane
// plus unit noise in all 2n coordinates.
Sds harmonic_hamiltonian(int n);

QuotientMap radius_map(int n);       // R^n minus origin -> r > 0, section on the x1-axis
QuotientMap energy_map();            // plane -> h > 0, section (sqrt(2h), 0)
QuotientMap torus_projection();      // T^2 -> T^1, forgetting theta1
Sds torus_counterexample();          // sin(2 pi theta1) d/dtheta2, no noise

} // namespace sds
