#include "sds/expr.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

namespace sds {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s;
    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27; z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) { h ^= c; h *= 0x100000001B3ULL; }
    return h;
}

// Largest b with b^2 dividing n (n >= 0), by trial division.
std::int64_t square_part(std::int64_t n) {
    if (n < 0) n = -n;
    std::int64_t b = 1;
    for (std::int64_t p = 2; p * p <= n; ++p) {
        while (n % (p * p) == 0) { n /= p * p; b *= p; }
    }
    return b;
}

} // namespace

// ---- Coef ----------------------------------------------------------------

Coef Coef::operator+(const Coef& o) const {
    if (float_ || o.float_) return Coef(to_double() + o.to_double());
    return Coef(rat_ + o.rat_);
}
Coef Coef::operator*(const Coef& o) const {
    if (float_ || o.float_) return Coef(to_double() * o.to_double());
    return Coef(rat_ * o.rat_);
}
Coef Coef::operator-() const {
    return float_ ? Coef(-val_) : Coef(-rat_);
}
Coef Coef::inverse() const {
    if (float_) {
        if (val_ == 0.0) throw std::domain_error("division by zero coefficient");
        return Coef(1.0 / val_);
    }
    return Coef(Rational(1) / rat_);
}
Coef Coef::pow(int e) const {
    if (float_) {
        double r = std::pow(val_, e);
        return Coef(r);
    }
    return Coef(rat_.pow(e));
}
int Coef::compare(const Coef& a, const Coef& b) {
    if (a.float_ != b.float_) return a.float_ ? 1 : -1;
    if (a.float_) {
        if (a.val_ < b.val_) return -1;
        if (a.val_ > b.val_) return 1;
        return 0;
    }
    if (a.rat_ == b.rat_) return 0;
    return a.rat_ < b.rat_ ? -1 : 1;
}
std::string Coef::str() const {
    if (!float_) return rat_.str();
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", val_);
    return buf;
}

// ---- Atom / Term comparisons ---------------------------------------------

int Atom::compare(const Atom& a, const Atom& b) {
    if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
    switch (a.kind) {
    case Kind::Name:
        return a.name.compare(b.name);
    case Kind::Func:
        if (a.fn != b.fn) return a.fn < b.fn ? -1 : 1;
        return Expr::compare(*a.arg, *b.arg);
    case Kind::UFunc: {
        int c = a.name.compare(b.name);
        if (c) return c;
        if (a.ticks != b.ticks) return a.ticks < b.ticks ? -1 : 1;
        return Expr::compare(*a.arg, *b.arg);
    }
    case Kind::Base:
        return Expr::compare(*a.arg, *b.arg);
    }
    return 0;
}

int Term::compare_factors(const Term& a, const Term& b) {
    int da = 0, db = 0;
    for (auto& [at, e] : a.factors) da += e > 0 ? e : -e;
    for (auto& [at, e] : b.factors) db += e > 0 ? e : -e;
    if (da != db) return da > db ? -1 : 1; // higher total degree first
    size_t n = std::min(a.factors.size(), b.factors.size());
    for (size_t i = 0; i < n; ++i) {
        int c = Atom::compare(a.factors[i].first, b.factors[i].first);
        if (c) return c;
        if (a.factors[i].second != b.factors[i].second)
            return a.factors[i].second > b.factors[i].second ? -1 : 1;
    }
    if (a.factors.size() != b.factors.size())
        return a.factors.size() > b.factors.size() ? -1 : 1;
    return 0;
}

// ---- canonicalization ----------------------------------------------------

namespace {

using Terms = std::vector<Term>;

Terms mul_raw(const Terms& a, const Terms& b) {
    Terms out;
    out.reserve(a.size() * b.size());
    for (const auto& ta : a) {
        for (const auto& tb : b) {
            Term t;
            t.coef = ta.coef * tb.coef;
            t.factors = ta.factors;
            t.factors.insert(t.factors.end(), tb.factors.begin(), tb.factors.end());
            out.push_back(std::move(t));
        }
    }
    return out;
}

// Sort factors, merge equal atoms, drop zero exponents and dead terms,
// then sort and collect terms.
void combine(Terms& terms) {
    for (auto& t : terms) {
        std::sort(t.factors.begin(), t.factors.end(),
                  [](const auto& x, const auto& y) { return Atom::compare(x.first, y.first) < 0; });
        std::vector<std::pair<Atom, int>> merged;
        for (auto& f : t.factors) {
            if (!merged.empty() && Atom::compare(merged.back().first, f.first) == 0)
                merged.back().second += f.second;
            else
                merged.push_back(f);
        }
        merged.erase(std::remove_if(merged.begin(), merged.end(),
                                    [](const auto& f) { return f.second == 0; }),
                     merged.end());
        t.factors = std::move(merged);
    }
    terms.erase(std::remove_if(terms.begin(), terms.end(),
                               [](const Term& t) { return t.coef.is_zero(); }),
                terms.end());
    std::sort(terms.begin(), terms.end(),
              [](const Term& x, const Term& y) { return Term::compare_factors(x, y) < 0; });
    Terms collected;
    for (auto& t : terms) {
        if (!collected.empty() && Term::compare_factors(collected.back(), t) == 0)
            collected.back().coef = collected.back().coef + t.coef;
        else
            collected.push_back(std::move(t));
    }
    collected.erase(std::remove_if(collected.begin(), collected.end(),
                                   [](const Term& t) { return t.coef.is_zero(); }),
                    collected.end());
    terms = std::move(collected);
}

// Rewrites inside one term that change representation:
//   sqrt(u)^e, e not in {0,1}  ->  u^m * sqrt(u)^rem  (rem in {0,1})
//   cos(u)^e,  e >= 2          ->  (1 - sin(u)^2)^m * cos(u)^rem
//   Base(P)^e, e > 0           ->  expanded P^e
// Returns true and pushes replacement terms when something fired.
bool rewrite_term(const Term& t, Terms& out) {
    for (size_t i = 0; i < t.factors.size(); ++i) {
        const Atom& a = t.factors[i].first;
        int e = t.factors[i].second;
        bool fire = false;
        int rem = 0;
        if (a.kind == Atom::Kind::Func && a.fn == Fn::Sqrt && e != 1 && e != 0) {
            rem = ((e % 2) + 2) % 2;
            fire = true;
        } else if (a.kind == Atom::Kind::Func && a.fn == Fn::Cos && e >= 2) {
            rem = e % 2;
            fire = true;
        } else if (a.kind == Atom::Kind::Base && e > 0) {
            rem = 0;
            fire = true;
        }
        if (!fire) continue;

        int m = (e - rem) / 2;
        Term rest;
        rest.coef = t.coef;
        rest.factors = t.factors;
        Expr mult;
        if (a.kind == Atom::Kind::Base) {
            mult = a.arg->pow(e);
            rest.factors.erase(rest.factors.begin() + i);
        } else {
            if (rem == 0)
                rest.factors.erase(rest.factors.begin() + i);
            else
                rest.factors[i].second = rem;
            if (a.fn == Fn::Sqrt) {
                mult = a.arg->pow(m);
            } else { // Cos
                Expr s2 = Expr::integer(1) - sin(*a.arg) * sin(*a.arg);
                mult = s2.pow(m);
            }
        }
        Terms r = mul_raw({rest}, mult.terms());
        out.insert(out.end(), r.begin(), r.end());
        return true;
    }
    out.push_back(t);
    return false;
}

// Laurent monomial over symbol names.
using NameMono = std::map<std::string, int>;

struct NamePoly {
    std::vector<std::pair<NameMono, Coef>> terms; // sorted graded-lex desc
};

int mono_cmp(const NameMono& a, const NameMono& b) {
    int da = 0, db = 0;
    for (auto& [n, e] : a) da += e;
    for (auto& [n, e] : b) db += e;
    if (da != db) return da > db ? -1 : 1;
    auto ia = a.begin(); auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        int c = ia->first.compare(ib->first);
        if (c) return c < 0 ? -1 : 1;
        if (ia->second != ib->second) return ia->second > ib->second ? -1 : 1;
        ++ia; ++ib;
    }
    if (ia != a.end()) return -1;
    if (ib != b.end()) return 1;
    return 0;
}

void poly_sort(NamePoly& p) {
    std::sort(p.terms.begin(), p.terms.end(),
              [](const auto& x, const auto& y) { return mono_cmp(x.first, y.first) < 0; });
}

// Exact division in the Laurent polynomial ring; empty optional if it fails.
std::optional<NamePoly> poly_divide(NamePoly c, const NamePoly& p) {
    if (p.terms.empty()) return std::nullopt;
    // Shift negatives away so ordinary multivariate division applies.
    NameMono shift;
    auto note = [&](const NamePoly& q) {
        for (auto& [m, cf] : q.terms)
            for (auto& [n, e] : m)
                if (e < 0) {
                    int& s = shift[n];
                    s = std::max(s, -e);
                }
    };
    note(c); note(p);
    auto shifted = [&](NamePoly q) {
        for (auto& [m, cf] : q.terms)
            for (auto& [n, s] : shift)
                if (s) {
                    int& e = m[n];
                    e += s;
                    if (e == 0) m.erase(n);
                }
        poly_sort(q);
        return q;
    };
    // c/p is unchanged when both sides are scaled by the same monomial.
    NamePoly C = shifted(std::move(c));
    NamePoly P = shifted(p);
    NamePoly quot;
    int guard = 0;
    while (!C.terms.empty()) {
        if (++guard > 4096) return std::nullopt;
        const auto& [lm, lc] = C.terms.front();
        const auto& [pm, pc] = P.terms.front();
        NameMono qm = lm;
        for (auto& [n, e] : pm) {
            qm[n] -= e;
            if (qm[n] == 0) qm.erase(n);
        }
        for (auto& [n, e] : qm)
            if (e < 0) return std::nullopt; // not divisible in the shifted ring
        Coef qc = lc * pc.inverse();
        quot.terms.push_back({qm, qc});
        // C -= (qm,qc) * P
        NamePoly prod;
        for (auto& [m, cf] : P.terms) {
            NameMono nm = m;
            for (auto& [n, e] : qm) {
                nm[n] += e;
                if (nm[n] == 0) nm.erase(n);
            }
            prod.terms.push_back({nm, -(cf * qc)});
        }
        for (auto& t : prod.terms) C.terms.push_back(t);
        poly_sort(C);
        std::vector<std::pair<NameMono, Coef>> merged;
        for (auto& t : C.terms) {
            if (!merged.empty() && mono_cmp(merged.back().first, t.first) == 0)
                merged.back().second = merged.back().second + t.second;
            else
                merged.push_back(t);
        }
        merged.erase(std::remove_if(merged.begin(), merged.end(),
                                    [](const auto& t) { return t.second.is_zero(); }),
                     merged.end());
        C.terms = std::move(merged);
    }
    poly_sort(quot);
    return quot;
}

// Is this expression a pure polynomial in symbol names (positive powers only)?
bool pure_name_poly(const Expr& e) {
    for (const auto& t : e.terms())
        for (const auto& [a, k] : t.factors)
            if (a.kind != Atom::Kind::Name || k < 0) return false;
    return true;
}

NamePoly to_name_poly(const Terms& terms) {
    NamePoly p;
    for (const auto& t : terms) {
        NameMono m;
        for (const auto& [a, k] : t.factors) m[a.name] = k;
        p.terms.push_back({m, t.coef});
    }
    poly_sort(p);
    return p;
}

// Cancel polynomial cofactors against Base(P)^-k denominators: terms are
// grouped by their non-symbol factors; if a group's symbol-part polynomial is
// divisible by P, one power of the denominator is absorbed.
bool reduce_groups(Terms& terms) {
    struct Group {
        std::vector<std::pair<Atom, int>> rkey; // Func/UFunc/Base factors
        Terms members;
    };
    std::vector<Group> groups;
    for (const auto& t : terms) {
        Term sym, rest;
        sym.coef = t.coef;
        for (const auto& f : t.factors) {
            if (f.first.kind == Atom::Kind::Name) sym.factors.push_back(f);
            else rest.factors.push_back(f);
        }
        Group* g = nullptr;
        for (auto& cand : groups) {
            if (cand.rkey.size() != rest.factors.size()) continue;
            bool same = true;
            for (size_t i = 0; i < cand.rkey.size(); ++i) {
                if (Atom::compare(cand.rkey[i].first, rest.factors[i].first) != 0 ||
                    cand.rkey[i].second != rest.factors[i].second) { same = false; break; }
            }
            if (same) { g = &cand; break; }
        }
        if (!g) {
            groups.push_back({rest.factors, {}});
            g = &groups.back();
        }
        g->members.push_back(sym);
    }

    bool changed = false;
    Terms out;
    for (auto& g : groups) {
        bool reduced = false;
        for (size_t i = 0; i < g.rkey.size() && !reduced; ++i) {
            const Atom& a = g.rkey[i].first;
            int e = g.rkey[i].second;
            if (a.kind != Atom::Kind::Base || e >= 0) continue;
            if (!pure_name_poly(*a.arg)) continue;
            NamePoly num = to_name_poly(g.members);
            NamePoly den = to_name_poly(a.arg->terms());
            auto q = poly_divide(num, den);
            if (!q) continue;
            // rebuild group: quotient * rkey with this exponent bumped up
            auto rkey = g.rkey;
            if (++rkey[i].second == 0) rkey.erase(rkey.begin() + i);
            Terms rebuilt;
            for (auto& [m, cf] : q->terms) {
                Term t;
                t.coef = cf;
                for (auto& [n, k] : m) {
                    Atom at; at.kind = Atom::Kind::Name; at.name = n;
                    t.factors.push_back({at, k});
                }
                t.factors.insert(t.factors.end(), rkey.begin(), rkey.end());
                rebuilt.push_back(std::move(t));
            }
            out.insert(out.end(), rebuilt.begin(), rebuilt.end());
            reduced = true;
            changed = true;
        }
        if (!reduced) {
            for (auto& m : g.members) {
                Term t = m;
                t.factors.insert(t.factors.end(), g.rkey.begin(), g.rkey.end());
                out.push_back(std::move(t));
            }
        }
    }
    if (changed) terms = std::move(out);
    return changed;
}

} // namespace

Expr Expr::from_terms(std::vector<Term> terms) {
    for (int round = 0; round < 64; ++round) {
        combine(terms);
        Terms next;
        bool changed = false;
        for (const auto& t : terms)
            changed |= rewrite_term(t, next);
        terms = std::move(next);
        if (changed) continue;
        combine(terms);
        if (!reduce_groups(terms)) break;
    }
    combine(terms);
    Expr e;
    e.terms_ = std::make_shared<const std::vector<Term>>(std::move(terms));
    return e;
}

// ---- basic constructors --------------------------------------------------

Expr::Expr() : terms_(std::make_shared<const std::vector<Term>>()) {}

const std::vector<Term>& Expr::terms() const { return *terms_; }

Expr Expr::integer(std::int64_t n) { return rational(Rational(n)); }

Expr Expr::rational(Rational r) {
    if (r.is_zero()) return Expr();
    Term t; t.coef = Coef(r);
    return from_terms({t});
}

Expr Expr::floating(double v) {
    if (v == 0.0) return Expr();
    Term t; t.coef = Coef(v);
    return from_terms({t});
}

Expr Expr::symbol(const std::string& name) {
    Term t; t.coef = Coef(Rational(1));
    Atom a; a.kind = Atom::Kind::Name; a.name = name;
    t.factors.push_back({a, 1});
    return from_terms({t});
}

Expr Expr::pi() { return symbol("pi"); }

bool Expr::is_zero_literal() const { return terms_->empty(); }

bool Expr::is_constant() const {
    return terms_->empty() || (terms_->size() == 1 && (*terms_)[0].factors.empty());
}

std::optional<Rational> Expr::as_rational() const {
    if (terms_->empty()) return Rational(0);
    if (terms_->size() == 1 && (*terms_)[0].factors.empty() && !(*terms_)[0].coef.is_float())
        return (*terms_)[0].coef.rat();
    return std::nullopt;
}

std::optional<double> Expr::as_constant() const {
    if (terms_->empty()) return 0.0;
    if (terms_->size() == 1 && (*terms_)[0].factors.empty())
        return (*terms_)[0].coef.to_double();
    return std::nullopt;
}

// ---- arithmetic ----------------------------------------------------------

Expr operator+(const Expr& a, const Expr& b) {
    Terms t = a.terms();
    const Terms& u = b.terms();
    t.insert(t.end(), u.begin(), u.end());
    return Expr::from_terms(std::move(t));
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr Expr::operator-() const {
    Terms t = terms();
    for (auto& x : t) x.coef = -x.coef;
    return from_terms(std::move(t));
}

Expr operator*(const Expr& a, const Expr& b) {
    return Expr::from_terms(mul_raw(a.terms(), b.terms()));
}

Expr operator/(const Expr& a, const Expr& b) { return a * b.pow(-1); }

namespace {

// Inverse of a canonical expression: single terms invert directly; sums get a
// content-normalized Base atom with exponent -1.
Expr invert(const Expr& e) {
    const Terms& ts = e.terms();
    if (ts.empty()) throw std::domain_error("division by zero expression");
    if (ts.size() == 1) {
        Term t;
        t.coef = ts[0].coef.inverse();
        for (const auto& [a, k] : ts[0].factors) t.factors.push_back({a, -k});
        return Expr::from_terms({t});
    }
    // coefficient content: gcd of numerators / lcm of denominators (rational
    // case), signed so the leading coefficient of the base comes out positive
    bool any_float = false;
    for (const auto& t : ts) any_float |= t.coef.is_float();
    Coef content;
    if (any_float) {
        content = Coef(ts[0].coef.to_double());
    } else {
        std::int64_t g = 0, l = 1;
        for (const auto& t : ts) {
            std::int64_t n = t.coef.rat().num();
            g = std::gcd(g, n < 0 ? -n : n);
            l = std::lcm(l, t.coef.rat().den());
        }
        Rational c(g, l);
        if (ts[0].coef.negative()) c = -c;
        content = Coef(c);
    }
    // shared symbol-factor content: atoms present in every term, min exponent
    std::vector<std::pair<Atom, int>> shared = ts[0].factors;
    for (size_t i = 1; i < ts.size() && !shared.empty(); ++i) {
        std::vector<std::pair<Atom, int>> keep;
        for (const auto& [a, k] : shared) {
            for (const auto& [b, j] : ts[i].factors) {
                if (Atom::compare(a, b) == 0) {
                    keep.push_back({a, std::min(k, j)});
                    break;
                }
            }
        }
        shared = std::move(keep);
    }
    Term content_term;
    content_term.coef = content;
    content_term.factors = shared;

    // base = e / content_term
    Coef cinv = content.inverse();
    Terms base;
    for (const auto& t : ts) {
        Term b;
        b.coef = t.coef * cinv;
        b.factors = t.factors;
        for (const auto& [a, k] : shared) b.factors.push_back({a, -k});
        base.push_back(std::move(b));
    }
    Expr base_e = Expr::from_terms(std::move(base));
    if (base_e.terms().size() == 1) {
        // content stripping collapsed the sum; invert the single survivor
        return invert(base_e) * Expr::from_terms({[&] {
            Term t; t.coef = cinv;
            for (const auto& [a, k] : shared) t.factors.push_back({a, -k});
            return t;
        }()});
    }
    Term t;
    t.coef = cinv;
    for (const auto& [a, k] : shared) t.factors.push_back({a, -k});
    Atom ba;
    ba.kind = Atom::Kind::Base;
    ba.arg = std::make_shared<const Expr>(base_e);
    t.factors.push_back({ba, -1});
    return Expr::from_terms({t});
}

} // namespace

Expr Expr::pow(int e) const {
    if (e == 0) return integer(1);
    Expr base = e > 0 ? *this : invert(*this);
    int k = e > 0 ? e : -e;
    Expr r = integer(1);
    while (k) {
        if (k & 1) r = r * base;
        k >>= 1;
        if (k) base = base * base;
    }
    return r;
}

// ---- function builders ---------------------------------------------------

namespace {

bool leading_negative(const Expr& e) {
    return !e.terms().empty() && e.terms()[0].coef.negative();
}

Expr func_atom(Fn fn, const Expr& arg) {
    Term t;
    t.coef = Coef(Rational(1));
    Atom a;
    a.kind = Atom::Kind::Func;
    a.fn = fn;
    a.arg = std::make_shared<const Expr>(arg);
    t.factors.push_back({a, 1});
    return Expr::from_terms({t});
}

} // namespace

Expr sin(const Expr& arg) {
    if (arg.is_zero_literal()) return Expr();
    if (leading_negative(arg)) return -sin(-arg);
    return func_atom(Fn::Sin, arg);
}

Expr cos(const Expr& arg) {
    if (arg.is_zero_literal()) return Expr::integer(1);
    if (leading_negative(arg)) return cos(-arg);
    return func_atom(Fn::Cos, arg);
}

Expr exp(const Expr& arg) {
    if (arg.is_zero_literal()) return Expr::integer(1);
    return func_atom(Fn::Exp, arg);
}

Expr sqrt(const Expr& arg) {
    if (arg.is_zero_literal()) return Expr();
    if (auto r = arg.as_rational()) {
        Rational s;
        if (r->sqrt_exact(s)) return Expr::rational(s);
    }
    // pull the rational square content out: sqrt(4x) -> 2 sqrt(x)
    const Terms& ts = arg.terms();
    bool any_float = false;
    for (const auto& t : ts) any_float |= t.coef.is_float();
    if (!any_float) {
        std::int64_t g = 0, l = 1;
        for (const auto& t : ts) {
            std::int64_t n = t.coef.rat().num();
            g = std::gcd(g, n < 0 ? -n : n);
            l = std::lcm(l, t.coef.rat().den());
        }
        std::int64_t sn = square_part(g), sd = square_part(l);
        if (sn > 1 || sd > 1) {
            Rational s(sn, sd);
            return Expr::rational(s) * func_atom(Fn::Sqrt, arg * Expr::rational((s * s).pow(-1)));
        }
    }
    return func_atom(Fn::Sqrt, arg);
}

Expr ufunc(const std::string& name, const Expr& arg, int ticks) {
    Term t;
    t.coef = Coef(Rational(1));
    Atom a;
    a.kind = Atom::Kind::UFunc;
    a.name = name;
    a.ticks = ticks;
    a.arg = std::make_shared<const Expr>(arg);
    t.factors.push_back({a, 1});
    return Expr::from_terms({t});
}

// ---- calculus ------------------------------------------------------------

namespace {

// d(atom)/dx, without the power-rule part.
Expr atom_derivative(const Atom& a, const std::string& x) {
    switch (a.kind) {
    case Atom::Kind::Name:
        return a.name == x ? Expr::integer(1) : Expr();
    case Atom::Kind::Func: {
        Expr da = a.arg->differentiate(x);
        if (da.is_zero_literal()) return Expr();
        switch (a.fn) {
        case Fn::Sin: return cos(*a.arg) * da;
        case Fn::Cos: return -sin(*a.arg) * da;
        case Fn::Exp: return exp(*a.arg) * da;
        case Fn::Sqrt:
            return da * Expr::rational(Rational(1, 2)) * sqrt(*a.arg).pow(-1);
        }
        return Expr();
    }
    case Atom::Kind::UFunc: {
        Expr da = a.arg->differentiate(x);
        if (da.is_zero_literal()) return Expr();
        return ufunc(a.name, *a.arg, a.ticks + 1) * da;
    }
    case Atom::Kind::Base:
        return a.arg->differentiate(x);
    }
    return Expr();
}

Expr atom_power(const Atom& a, int k) {
    if (k == 0) return Expr::integer(1);
    Term t;
    t.coef = Coef(Rational(1));
    t.factors.push_back({a, k});
    return Expr::from_terms({t});
}

} // namespace

Expr Expr::differentiate(const std::string& x) const {
    Expr sum;
    for (const auto& t : *terms_) {
        for (size_t i = 0; i < t.factors.size(); ++i) {
            const auto& [a, k] = t.factors[i];
            Expr da = atom_derivative(a, x);
            if (da.is_zero_literal()) continue;
            Term rest;
            rest.coef = t.coef;
            for (size_t j = 0; j < t.factors.size(); ++j)
                if (j != i) rest.factors.push_back(t.factors[j]);
            Expr piece = from_terms({rest});
            piece = piece * integer(k) * atom_power(a, k - 1) * da;
            sum += piece;
        }
    }
    return sum;
}

namespace {

Expr rebuild_atom(const Atom& a, const std::map<std::string, Expr>& bind,
                  const std::set<std::string>* positive);

Expr rebuild(const Expr& e, const std::map<std::string, Expr>& bind,
             const std::set<std::string>* positive) {
    Expr sum;
    for (const auto& t : e.terms()) {
        Term c;
        c.coef = t.coef;
        Expr prod = Expr::from_terms({c});
        for (const auto& [a, k] : t.factors)
            prod = prod * rebuild_atom(a, bind, positive).pow(k);
        sum += prod;
    }
    return sum;
}

// sqrt with even symbol powers extracted for positively-constrained symbols
Expr sqrt_positive(const Expr& arg, const std::set<std::string>& positive) {
    // factor content: min exponent per positive symbol across all terms
    std::map<std::string, int> minexp;
    bool first = true;
    for (const auto& t : arg.terms()) {
        std::map<std::string, int> cur;
        for (const auto& [a, k] : t.factors)
            if (a.kind == Atom::Kind::Name && positive.count(a.name)) cur[a.name] = k;
        if (first) { minexp = cur; first = false; continue; }
        for (auto it = minexp.begin(); it != minexp.end();) {
            auto f = cur.find(it->first);
            if (f == cur.end()) it = minexp.erase(it);
            else { it->second = std::min(it->second, f->second); ++it; }
        }
    }
    Expr outside = Expr::integer(1);
    Expr inside_scale = Expr::integer(1);
    for (auto& [n, e] : minexp) {
        int m = (e - (((e % 2) + 2) % 2)) / 2;
        if (m == 0) continue;
        outside = outside * Expr::symbol(n).pow(m);
        inside_scale = inside_scale * Expr::symbol(n).pow(-2 * m);
    }
    return outside * sqrt(arg * inside_scale);
}

Expr rebuild_atom(const Atom& a, const std::map<std::string, Expr>& bind,
                  const std::set<std::string>* positive) {
    switch (a.kind) {
    case Atom::Kind::Name: {
        auto it = bind.find(a.name);
        return it != bind.end() ? it->second : Expr::symbol(a.name);
    }
    case Atom::Kind::Func: {
        Expr arg = rebuild(*a.arg, bind, positive);
        switch (a.fn) {
        case Fn::Sin: return sin(arg);
        case Fn::Cos: return cos(arg);
        case Fn::Exp: return exp(arg);
        case Fn::Sqrt:
            return positive ? sqrt_positive(arg, *positive) : sqrt(arg);
        }
        return Expr();
    }
    case Atom::Kind::UFunc:
        return ufunc(a.name, rebuild(*a.arg, bind, positive), a.ticks);
    case Atom::Kind::Base:
        return rebuild(*a.arg, bind, positive);
    }
    return Expr();
}

} // namespace

Expr Expr::substitute(const std::map<std::string, Expr>& bind) const {
    return rebuild(*this, bind, nullptr);
}

Expr Expr::assume_positive(const std::set<std::string>& positive) const {
    return rebuild(*this, {}, &positive);
}

// ---- evaluation ----------------------------------------------------------

namespace {

double eval_atom(const Atom& a, const std::map<std::string, double>& pt,
                 const EvalContext* cx) {
    switch (a.kind) {
    case Atom::Kind::Name: {
        if (a.name == "pi") return std::numbers::pi_v<double>;
        auto it = pt.find(a.name);
        if (it == pt.end()) throw EvalError("unbound symbol: " + a.name);
        return it->second;
    }
    case Atom::Kind::Func: {
        double v = a.arg->eval(pt, cx);
        switch (a.fn) {
        case Fn::Sin: return std::sin(v);
        case Fn::Cos: return std::cos(v);
        case Fn::Exp: return std::exp(v);
        case Fn::Sqrt:
            if (v < 0) throw EvalError("sqrt of negative value");
            return std::sqrt(v);
        }
        return 0;
    }
    case Atom::Kind::UFunc: {
        if (!cx || !cx->ufunc)
            throw EvalError("no interpretation for function " + a.name);
        return cx->ufunc(a.name, a.ticks, a.arg->eval(pt, cx));
    }
    case Atom::Kind::Base:
        return a.arg->eval(pt, cx);
    }
    return 0;
}

double powi(double b, int e) {
    if (e < 0) {
        if (b == 0) throw EvalError("division by zero");
        return 1.0 / powi(b, -e);
    }
    double r = 1;
    while (e) {
        if (e & 1) r *= b;
        b *= b;
        e >>= 1;
    }
    return r;
}

} // namespace

namespace {

// Non-throwing power for the compiled tape; 0^-k propagates as inf/nan.
double vm_powi(double b, int e) {
    bool inv = e < 0;
    if (inv) e = -e;
    double r = 1;
    while (e) {
        if (e & 1) r *= b;
        b *= b;
        e >>= 1;
    }
    return inv ? 1.0 / r : r;
}

} // namespace

double Expr::eval(const std::map<std::string, double>& pt, const EvalContext* cx) const {
    double sum = 0;
    for (const auto& t : *terms_) {
        double v = t.coef.to_double();
        for (const auto& [a, k] : t.factors) v *= powi(eval_atom(a, pt, cx), k);
        sum += v;
    }
    return sum;
}

// ---- inspection ----------------------------------------------------------

namespace {

void collect_names(const Expr& e, std::set<std::string>& out) {
    for (const auto& t : e.terms())
        for (const auto& [a, k] : t.factors) {
            if (a.kind == Atom::Kind::Name) {
                if (a.name != "pi") out.insert(a.name);
            } else {
                collect_names(*a.arg, out);
            }
        }
}

} // namespace

std::set<std::string> Expr::free_names() const {
    std::set<std::string> out;
    collect_names(*this, out);
    return out;
}

bool Expr::has_float() const {
    for (const auto& t : *terms_) {
        if (t.coef.is_float()) return true;
        for (const auto& [a, k] : t.factors)
            if (a.kind != Atom::Kind::Name && a.arg->has_float()) return true;
    }
    return false;
}

bool Expr::has_ufunc() const {
    for (const auto& t : *terms_)
        for (const auto& [a, k] : t.factors) {
            if (a.kind == Atom::Kind::UFunc) return true;
            if (a.kind != Atom::Kind::Name && a.arg->has_ufunc()) return true;
        }
    return false;
}

int Expr::compare(const Expr& a, const Expr& b) {
    const Terms& x = a.terms();
    const Terms& y = b.terms();
    size_t n = std::min(x.size(), y.size());
    for (size_t i = 0; i < n; ++i) {
        int c = Term::compare_factors(x[i], y[i]);
        if (c) return c;
        c = Coef::compare(x[i].coef, y[i].coef);
        if (c) return c;
    }
    if (x.size() != y.size()) return x.size() < y.size() ? -1 : 1;
    return 0;
}

// ---- rendering -----------------------------------------------------------

namespace {

std::string atom_str(const Atom& a) {
    switch (a.kind) {
    case Atom::Kind::Name:
        return a.name;
    case Atom::Kind::Func: {
        const char* f = a.fn == Fn::Sin ? "sin" : a.fn == Fn::Cos ? "cos"
                        : a.fn == Fn::Exp ? "exp" : "sqrt";
        return std::string(f) + "(" + a.arg->str() + ")";
    }
    case Atom::Kind::UFunc: {
        std::string s = a.name;
        for (int i = 0; i < a.ticks; ++i) s += "'";
        return s + "(" + a.arg->str() + ")";
    }
    case Atom::Kind::Base:
        return "(" + a.arg->str() + ")";
    }
    return "";
}

std::string term_str(const Term& t, bool lead) {
    std::string s;
    Coef c = t.coef;
    bool neg = c.negative();
    if (neg) c = -c;
    if (lead) {
        if (neg) s += "-";
    } else {
        s += neg ? " - " : " + ";
    }
    std::vector<std::string> pieces;
    if (!c.is_one() || t.factors.empty()) pieces.push_back(c.str());
    for (const auto& [a, k] : t.factors) {
        std::string f = atom_str(a);
        if (k != 1) f += "^" + std::to_string(k);
        pieces.push_back(std::move(f));
    }
    for (size_t i = 0; i < pieces.size(); ++i) {
        if (i) s += "*";
        s += pieces[i];
    }
    return s;
}

} // namespace

std::string Expr::str() const {
    if (terms_->empty()) return "0";
    std::string s;
    bool lead = true;
    for (const auto& t : *terms_) {
        s += term_str(t, lead);
        lead = false;
    }
    return s;
}

// ---- zero testing --------------------------------------------------------

std::string ZeroVerdict::str() const {
    switch (status) {
    case ZeroStatus::SymbolicZero: return "SymbolicZero";
    case ZeroStatus::NumericZero: {
        std::ostringstream os;
        os << "NumericZero(max_residual=" << max_residual << ", samples=" << samples << ")";
        return os.str();
    }
    case ZeroStatus::NonZero: {
        std::ostringstream os;
        os << "NonZero(residual=" << witness_residual;
        if (witness) {
            os << " at";
            for (const auto& [n, v] : *witness) os << " " << n << "=" << v;
        }
        os << ")";
        return os.str();
    }
    }
    return "";
}

ZeroVerdict merge(const ZeroVerdict& a, const ZeroVerdict& b) {
    ZeroVerdict out;
    out.status = std::max(a.status, b.status);
    out.max_residual = std::max(a.max_residual, b.max_residual);
    out.samples = std::max(a.samples, b.samples);
    if (a.witness) { out.witness = a.witness; out.witness_residual = a.witness_residual; }
    else if (b.witness) { out.witness = b.witness; out.witness_residual = b.witness_residual; }
    return out;
}

ZeroVerdict is_zero(const Expr& e, const SampleDomain& domain, const ZeroTestOptions& opts) {
    ZeroVerdict v;
    if (e.is_zero_literal()) return v;

    std::set<std::string> names = e.free_names();
    std::map<std::string, std::pair<double, double>> box;
    for (const auto& n : names) box[n] = {0.5, 2.0};
    for (const auto& r : domain)
        if (names.count(r.name)) box[r.name] = {r.lo, r.hi};

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    EvalContext cx;
    std::uint64_t fseed = opts.seed;
    cx.ufunc = [fseed](const std::string& name, int ticks, double u) {
        std::uint64_t s = fnv1a(name) ^ fseed;
        double alpha = 0.8 + 0.9 * (splitmix64(s) >> 11) * 0x1p-53;
        double beta = 6.28 * (splitmix64(s) >> 11) * 0x1p-53;
        double gamma = 0.6 + (splitmix64(s) >> 11) * 0x1p-53;
        double delta = 2.0 * (splitmix64(s) >> 11) * 0x1p-53 - 1.0;
        double r = gamma * std::pow(alpha, ticks) *
                   std::sin(alpha * u + beta + ticks * std::numbers::pi_v<double> / 2);
        if (ticks == 0) r += delta;
        return r;
    };

    int valid = 0;
    int attempts = 0;
    const int max_attempts = opts.samples * 10;
    while (valid < opts.samples && attempts < max_attempts) {
        ++attempts;
        std::map<std::string, double> pt;
        for (const auto& [n, b] : box)
            pt[n] = b.first + (b.second - b.first) * unif(rng);
        double value = 0, scale = 0;
        bool bad = false;
        for (const auto& t : e.terms()) {
            double tv;
            try {
                tv = t.coef.to_double();
                for (const auto& [a, k] : t.factors) tv *= powi(eval_atom(a, pt, &cx), k);
            } catch (const EvalError&) {
                bad = true;
                break;
            }
            if (!std::isfinite(tv)) { bad = true; break; }
            value += tv;
            scale += std::abs(tv);
        }
        if (bad) continue;
        ++valid;
        double residual = std::abs(value);
        double tolv = opts.tol * (1.0 + scale);
        if (residual > tolv) {
            v.status = ZeroStatus::NonZero;
            v.witness = pt;
            v.witness_residual = residual;
            v.samples = valid;
            return v;
        }
        v.max_residual = std::max(v.max_residual, residual);
    }
    if (valid == 0)
        throw EvalError("no valid sample points for zero test");
    v.status = ZeroStatus::NumericZero;
    v.samples = valid;
    return v;
}

// ---- compiled evaluation -------------------------------------------------

CompiledExpr::CompiledExpr(const Expr& e, const std::vector<std::string>& layout) {
    std::map<std::string, int> slot;
    for (size_t i = 0; i < layout.size(); ++i) slot[layout[i]] = static_cast<int>(i);
    emit_expr(e, slot);
    stack_.resize(code_.size() + 2);
}

void CompiledExpr::emit_atom(const Atom& a, const std::map<std::string, int>& slot) {
    switch (a.kind) {
    case Atom::Kind::Name: {
        if (a.name == "pi") {
            code_.push_back({Op::Const, std::numbers::pi_v<double>, 0});
            return;
        }
        auto it = slot.find(a.name);
        if (it == slot.end())
            throw EvalError("symbol not in layout: " + a.name);
        code_.push_back({Op::Load, 0, it->second});
        return;
    }
    case Atom::Kind::Func:
        emit_expr(*a.arg, slot);
        switch (a.fn) {
        case Fn::Sin: code_.push_back({Op::Sin, 0, 0}); break;
        case Fn::Cos: code_.push_back({Op::Cos, 0, 0}); break;
        case Fn::Exp: code_.push_back({Op::Exp, 0, 0}); break;
        case Fn::Sqrt: code_.push_back({Op::Sqrt, 0, 0}); break;
        }
        return;
    case Atom::Kind::UFunc:
        throw EvalError("cannot compile uninterpreted function " + a.name);
    case Atom::Kind::Base:
        emit_expr(*a.arg, slot);
        return;
    }
}

void CompiledExpr::emit_expr(const Expr& e, const std::map<std::string, int>& slot) {
    if (e.terms().empty()) {
        code_.push_back({Op::Const, 0.0, 0});
        return;
    }
    bool first = true;
    for (const auto& t : e.terms()) {
        code_.push_back({Op::Const, t.coef.to_double(), 0});
        for (const auto& [a, k] : t.factors) {
            emit_atom(a, slot);
            if (k != 1) code_.push_back({Op::PowI, 0, k});
            code_.push_back({Op::Mul, 0, 0});
        }
        if (!first) code_.push_back({Op::Add, 0, 0});
        first = false;
    }
}

double CompiledExpr::eval(const double* slots) const {
    double* sp = stack_.data();
    for (const auto& ins : code_) {
        switch (ins.op) {
        case Op::Const: *sp++ = ins.c; break;
        case Op::Load: *sp++ = slots[ins.a]; break;
        case Op::Add: sp[-2] += sp[-1]; --sp; break;
        case Op::Mul: sp[-2] *= sp[-1]; --sp; break;
        case Op::Inv: sp[-1] = 1.0 / sp[-1]; break;
        case Op::Neg: sp[-1] = -sp[-1]; break;
        case Op::PowI: sp[-1] = vm_powi(sp[-1], ins.a); break;
        case Op::Sin: sp[-1] = std::sin(sp[-1]); break;
        case Op::Cos: sp[-1] = std::cos(sp[-1]); break;
        case Op::Exp: sp[-1] = std::exp(sp[-1]); break;
        case Op::Sqrt: sp[-1] = std::sqrt(sp[-1]); break;
        }
    }
    return sp[-1];
}

} // namespace sds
