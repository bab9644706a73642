#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sds/rational.hpp"

namespace sds {

// Scalar expressions kept in a canonical form: a sum of terms, each term a
// coefficient times a product of atom powers.  Atoms are symbol names,
// function applications (sin/cos/exp/sqrt, plus uninterpreted functions with
// derivative ticks), or whole polynomial bases carrying negative exponents.
// Construction canonicalizes eagerly, so two equal polynomial or rational
// expressions built along different routes compare identical term-by-term.
//
// Canonicalization rules worth knowing about:
//   - even powers of cos(u) are rewritten through 1 - sin(u)^2,
//   - even powers of sqrt(u) collapse into powers of u,
//   - rational square factors are pulled out of sqrt arguments,
//   - sums raised to negative powers become content-normalized base atoms,
//   - polynomial cofactors divisible by a denominator base are cancelled.
// The name "pi" is reserved for the circle constant and is never sampled
// or treated as a free symbol.

class Expr;

struct EvalError : std::runtime_error {
    explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

// Coefficient: exact rational unless a float literal entered the mix.
class Coef {
public:
    Coef() : float_(false), rat_(0), val_(0) {}
    Coef(Rational r) : float_(false), rat_(r), val_(0) {}
    explicit Coef(double v) : float_(true), rat_(0), val_(v) {}

    bool is_float() const { return float_; }
    bool is_zero() const { return float_ ? val_ == 0.0 : rat_.is_zero(); }
    bool is_one() const { return float_ ? val_ == 1.0 : rat_.is_one(); }
    bool negative() const { return float_ ? val_ < 0.0 : rat_.negative(); }
    const Rational& rat() const { return rat_; }
    double to_double() const { return float_ ? val_ : rat_.to_double(); }

    Coef operator+(const Coef& o) const;
    Coef operator*(const Coef& o) const;
    Coef operator-() const;
    Coef inverse() const;
    Coef pow(int e) const;
    static int compare(const Coef& a, const Coef& b);
    std::string str() const;

private:
    bool float_;
    Rational rat_;
    double val_;
};

enum class Fn { Sin, Cos, Exp, Sqrt };

struct Atom {
    enum class Kind { Name, Func, UFunc, Base };
    Kind kind = Kind::Name;
    std::string name;               // Name, UFunc
    Fn fn = Fn::Sin;                // Func
    int ticks = 0;                  // UFunc derivative order
    std::shared_ptr<const Expr> arg;// Func, UFunc, Base

    static int compare(const Atom& a, const Atom& b);
};

struct Term {
    Coef coef;
    std::vector<std::pair<Atom, int>> factors; // sorted, exponents nonzero

    static int compare_factors(const Term& a, const Term& b);
};

struct EvalContext {
    // Interpretation for uninterpreted functions: (name, ticks, x) -> value.
    std::function<double(const std::string&, int, double)> ufunc;
};

class Expr {
public:
    Expr();                                   // zero
    static Expr integer(std::int64_t n);
    static Expr rational(Rational r);
    static Expr floating(double v);
    static Expr symbol(const std::string& name);
    static Expr pi();

    const std::vector<Term>& terms() const;

    bool is_zero_literal() const;             // canonical form has no terms
    bool is_constant() const;                 // zero or a single factorless term
    std::optional<Rational> as_rational() const;
    std::optional<double> as_constant() const;

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    Expr operator-() const;
    Expr& operator+=(const Expr& o) { *this = *this + o; return *this; }
    Expr& operator-=(const Expr& o) { *this = *this - o; return *this; }
    Expr& operator*=(const Expr& o) { *this = *this * o; return *this; }

    Expr pow(int e) const;

    Expr differentiate(const std::string& name) const;
    Expr substitute(const std::map<std::string, Expr>& bind) const;
    // Re-canonicalize pulling even symbol powers out of sqrt arguments for
    // symbols known to be positive (quotient charts with r > 0 and friends).
    Expr assume_positive(const std::set<std::string>& positive) const;

    double eval(const std::map<std::string, double>& point,
                const EvalContext* cx = nullptr) const;

    std::set<std::string> free_names() const; // excludes "pi"
    bool has_float() const;
    bool has_ufunc() const;

    std::string str() const;

    static int compare(const Expr& a, const Expr& b);
    friend bool operator==(const Expr& a, const Expr& b) { return compare(a, b) == 0; }
    friend bool operator!=(const Expr& a, const Expr& b) { return compare(a, b) != 0; }

    // Internal: build from raw terms, canonicalizing.
    static Expr from_terms(std::vector<Term> terms);

private:
    std::shared_ptr<const std::vector<Term>> terms_;
};

Expr sin(const Expr& arg);
Expr cos(const Expr& arg);
Expr exp(const Expr& arg);
Expr sqrt(const Expr& arg);
// Uninterpreted function application f(arg); ticks counts derivative marks.
Expr ufunc(const std::string& name, const Expr& arg, int ticks = 0);

// ---- zero testing --------------------------------------------------------

struct SampleRange {
    std::string name;
    double lo = -2.0;
    double hi = 2.0;
};
using SampleDomain = std::vector<SampleRange>;

enum class ZeroStatus { SymbolicZero, NumericZero, NonZero };

struct ZeroVerdict {
    ZeroStatus status = ZeroStatus::SymbolicZero;
    double max_residual = 0.0;
    int samples = 0;
    std::optional<std::map<std::string, double>> witness;
    double witness_residual = 0.0;

    bool ok() const { return status != ZeroStatus::NonZero; }
    bool symbolic() const { return status == ZeroStatus::SymbolicZero; }
    std::string str() const;
};

// Worst verdict wins; keeps the first witness seen.
ZeroVerdict merge(const ZeroVerdict& a, const ZeroVerdict& b);

struct ZeroTestOptions {
    int samples = 64;
    double tol = 1e-9;
    std::uint64_t seed = 0x51ab5eedULL;
};

// Free names absent from the domain are sampled from [0.5, 2].  Sample points
// where evaluation hits a domain error are redrawn (bounded retry budget).
ZeroVerdict is_zero(const Expr& e, const SampleDomain& domain = {},
                    const ZeroTestOptions& opts = {});

// ---- compiled evaluation -------------------------------------------------

// Flat postfix tape for fast repeated evaluation on a fixed symbol layout.
// Rejects expressions containing uninterpreted functions.
class CompiledExpr {
public:
    CompiledExpr() = default;
    CompiledExpr(const Expr& e, const std::vector<std::string>& layout);

    double eval(const double* slots) const;

private:
    enum class Op : std::uint8_t { Const, Load, Add, Mul, Inv, Neg, PowI, Sin, Cos, Exp, Sqrt };
    struct Ins { Op op; double c; int a; };
    std::vector<Ins> code_;
    mutable std::vector<double> stack_;
    void emit_expr(const Expr& e, const std::map<std::string, int>& slot);
    void emit_atom(const Atom& a, const std::map<std::string, int>& slot);
};

} // namespace sds
