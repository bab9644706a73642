#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sds {

// Exact rational with int64 numerator/denominator, always gcd-normalized,
// denominator > 0.  Intermediate products go through __int128; anything that
// would not fit back into int64 throws instead of silently wrapping.
class Rational {
public:
    Rational() : num_(0), den_(1) {}
    Rational(std::int64_t n) : num_(n), den_(1) {}
    Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) { normalize(); }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }

    bool is_zero() const { return num_ == 0; }
    bool is_one() const { return num_ == 1 && den_ == 1; }
    bool is_integer() const { return den_ == 1; }
    bool negative() const { return num_ < 0; }

    double to_double() const {
        return static_cast<double>(num_) / static_cast<double>(den_);
    }

    friend Rational operator+(const Rational& a, const Rational& b) {
        __int128 n = i128(a.num_) * b.den_ + i128(b.num_) * a.den_;
        __int128 d = i128(a.den_) * b.den_;
        return make(n, d);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        __int128 n = i128(a.num_) * b.den_ - i128(b.num_) * a.den_;
        __int128 d = i128(a.den_) * b.den_;
        return make(n, d);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return make(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num_ == 0) throw std::domain_error("rational division by zero");
        return make(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
    }
    Rational operator-() const { return Rational(-num_, den_); }

    Rational& operator+=(const Rational& o) { *this = *this + o; return *this; }
    Rational& operator-=(const Rational& o) { *this = *this - o; return *this; }
    Rational& operator*=(const Rational& o) { *this = *this * o; return *this; }
    Rational& operator/=(const Rational& o) { *this = *this / o; return *this; }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return i128(a.num_) * b.den_ < i128(b.num_) * a.den_;
    }

    // Integer power, exponent may be negative.
    Rational pow(int e) const {
        if (e == 0) return Rational(1);
        Rational base = e > 0 ? *this : Rational(1) / *this;
        int k = e > 0 ? e : -e;
        Rational r(1);
        while (k) {
            if (k & 1) r *= base;
            base = (k >>= 1) ? base * base : base;
        }
        return r;
    }

    // Exact square root if this is a perfect square of a rational, else false.
    bool sqrt_exact(Rational& out) const {
        if (num_ < 0) return false;
        std::int64_t sn = isqrt(num_), sd = isqrt(den_);
        if (sn < 0 || sd < 0) return false;
        out = Rational(sn, sd);
        return true;
    }

    std::string str() const {
        if (den_ == 1) return std::to_string(num_);
        return std::to_string(num_) + "/" + std::to_string(den_);
    }

private:
    static __int128 i128(std::int64_t v) { return static_cast<__int128>(v); }

    static Rational make(__int128 n, __int128 d) {
        if (d == 0) throw std::domain_error("rational with zero denominator");
        if (d < 0) { n = -n; d = -d; }
        __int128 g = gcd128(n < 0 ? -n : n, d);
        if (g > 1) { n /= g; d /= g; }
        if (n > INT64_MAX || n < INT64_MIN || d > INT64_MAX)
            throw std::overflow_error("rational overflow");
        Rational r;
        r.num_ = static_cast<std::int64_t>(n);
        r.den_ = static_cast<std::int64_t>(d);
        return r;
    }

    static __int128 gcd128(__int128 a, __int128 b) {
        while (b) { __int128 t = a % b; a = b; b = t; }
        return a < 0 ? -a : a;
    }

    static std::int64_t isqrt(std::int64_t v) {
        if (v < 0) return -1;
        auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
        while (r > 0 && r * r > v) --r;
        while ((r + 1) * (r + 1) <= v) ++r;
        return r * r == v ? r : -1;
    }

    void normalize() {
        if (den_ == 0) throw std::domain_error("rational with zero denominator");
        if (den_ < 0) { num_ = -num_; den_ = -den_; }
        std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
        if (g > 1) { num_ /= g; den_ /= g; }
    }

    std::int64_t num_;
    std::int64_t den_;
};

} // namespace sds
