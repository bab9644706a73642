#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sds/symbol.hpp"

namespace sds {

// A commuting family on a chart: p second-order operators shaped like
// diffusion generators, q vector fields, r scalar functions, with
// p + q + r equal to the chart dimension.  Members are numbered with the
// operators first, then the fields, then the functions.
struct IntegrableSystem {
    Chart chart;
    std::vector<DiffOp> lambdas;
    std::vector<VectorField> zs;
    std::vector<Expr> fs;

    int p() const { return static_cast<int>(lambdas.size()); }
    int q() const { return static_cast<int>(zs.size()); }
    int r() const { return static_cast<int>(fs.size()); }
    int size() const { return p() + q() + r(); }

    // Member k as a linear differential operator: fields act as first-order
    // operators, functions as multiplication operators.
    DiffOp member(int k) const;
    // Member k as a function on the cotangent bundle (the principal symbol:
    // degree 2, 1 and 0 for the three kinds).
    CotangentPoly symbol(int k) const;
    std::string member_label(int k) const;  // "lambda1", "z2", "f1"
};

enum class PointClass { Regular, SemiRegular, Singular };
std::string str(PointClass c);

struct PairVerdict {
    int i = 0, j = 0;   // member indices, i < j
    ZeroVerdict verdict; // [member_i, member_j] = 0
};

struct PointClassification {
    std::map<std::string, double> point;
    PointClass cls = PointClass::Singular;
};

struct IntegrabilityReport {
    std::vector<PairVerdict> commutators;
    RankReport independence;
    int expected_rank = 0;
    std::vector<PointClassification> classifications;

    bool commute() const;
    bool independent() const { return independence.rank == expected_rank; }
    bool pass() const { return commute() && independent(); }
};

// Commutes every pair of members as operators and ranks the symbols for
// functional independence; a handful of sample points is classified along
// the way.  Throws only on malformed systems (mixed charts, an operator
// member with a zeroth-order term, p + q + r != dim); verification failures
// land in the report.
IntegrabilityReport verify_system(const IntegrableSystem& sys, int samples = 32,
                                  std::uint64_t seed = 0x16a77e5ULL);

struct SdsIntegrabilityReport {
    IntegrabilityReport system;
    std::vector<ZeroVerdict> generator_commutators;  // [A_X, member_k]

    bool pass() const;
};

// The system must pass on its own and the diffusion generator of the SDS
// must commute with every member.
SdsIntegrabilityReport verify_sds_integrable(const Sds& x, const IntegrableSystem& sys,
                                             int samples = 32,
                                             std::uint64_t seed = 0x16a77e5ULL);

// Rewrites the family using operators only: each field Z becomes 1/2 Z^2,
// each function F becomes F^2 lambda_1, or 1/2 (F Z_1)^2 when the family
// has no operator to lean on.  Requires p + q >= 1.
IntegrableSystem promote_to_p00(const IntegrableSystem& sys);

// Point taxonomy.  Semi-regular: the function differentials have rank r and
// the operator ranges together with the field values span exactly their
// common kernel; regular: the field values alone are also independent.
// Singular values below tol * sigma_max count as zero.
PointClass classify_point(const IntegrableSystem& sys,
                          const std::map<std::string, double>& x,
                          double tol = 1e-8);

struct CoefficientViolation {
    std::vector<int> index;  // multi-index of the offending coefficient
    std::string angle;       // differentiation direction
    ZeroVerdict verdict;
};

struct TorusInvarianceReport {
    ZeroVerdict commutation;          // [Z, Lambda] = 0
    bool applicable = false;          // commutation holds, so the check ran
    bool frequencies_constant = false;
    bool attested = false;            // incommensurability supplied by the caller
    std::vector<CoefficientViolation> violations;

    // A passing commutation together with an angle-dependent coefficient
    // would contradict the density argument; such runs are flagged.
    bool counterexample() const { return applicable && !violations.empty(); }
    bool pass() const { return applicable && violations.empty(); }
};

// For Z = sum a_i d/dtheta_i with frequencies depending only on the
// non-periodic coordinates: checks [Z, Lambda] = 0 and then that every
// coefficient of Lambda is independent of the angles.  Constant frequencies
// are screened for integer relations sum k_i a_i = 0 with |k_i| <= 20
// (tolerance 1e-9); non-constant frequencies require attestation.
TorusInvarianceReport torus_invariance_check(const DiffOp& lambda, const VectorField& z,
                                             bool attest_incommensurable = false);

// Freezes the noise fields at the given angle section (keyed by periodic
// coordinate name) and rebuilds the drift as A - 1/2 sum Y_i^2, yielding a
// system with the same generator whose noise no longer depends on the
// angles.  Requires every generator coefficient to be angle-independent.
Sds normal_form(const Sds& x, const std::map<std::string, double>& section);

} // namespace sds
