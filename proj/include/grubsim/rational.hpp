#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>

#include <gmpxx.h>

#include "grubsim/errors.hpp"

namespace grubsim {

/// Exact rational number, always in canonical (reduced) form.
///
/// Thin value wrapper over GMP's mpq_class. Used for every quantity that
/// feeds an admission or ordering decision: utilizations, virtual times,
/// scheduling deadlines and event timestamps.
class Rational {
public:
    Rational() = default;
    Rational(std::int64_t v) : q_(static_cast<long>(v)) {} // NOLINT: implicit by design of numeric type
    Rational(std::int64_t num, std::int64_t den)
    {
        if (den == 0)
            fail(ErrorKind::Config, "rational with zero denominator");
        q_ = mpq_class(mpz_class(static_cast<long>(num)), mpz_class(static_cast<long>(den)));
        q_.canonicalize();
    }

    /// Accepts "7", "-3/4", "0.125" and "1e-3"-free decimal strings.
    static Rational parse(std::string_view text)
    {
        std::string s(text);
        if (s.empty())
            fail(ErrorKind::Config, "empty rational literal");
        auto slash = s.find('/');
        if (slash != std::string::npos) {
            Rational r;
            if (r.q_.set_str(s, 10) != 0 || r.q_.get_den() == 0)
                fail(ErrorKind::Config, "bad rational literal '" + s + "'");
            r.q_.canonicalize();
            return r;
        }
        bool neg = false;
        std::size_t i = 0;
        if (s[0] == '-' || s[0] == '+') {
            neg = s[0] == '-';
            i = 1;
        }
        mpz_class num = 0;
        mpz_class den = 1;
        bool seen_dot = false;
        bool seen_digit = false;
        for (; i < s.size(); ++i) {
            char c = s[i];
            if (c == '.' && !seen_dot) {
                seen_dot = true;
            } else if (c >= '0' && c <= '9') {
                num = num * 10 + (c - '0');
                if (seen_dot)
                    den *= 10;
                seen_digit = true;
            } else {
                fail(ErrorKind::Config, "bad rational literal '" + s + "'");
            }
        }
        if (!seen_digit)
            fail(ErrorKind::Config, "bad rational literal '" + s + "'");
        Rational r;
        r.q_ = mpq_class(neg ? mpz_class(-num) : num, den);
        r.q_.canonicalize();
        return r;
    }

    /// Exact value of a finite double (every double is a dyadic rational).
    static Rational from_double_exact(double v)
    {
        Rational r;
        r.q_ = v;
        return r;
    }

    int sign() const { return sgn(q_); }
    bool is_zero() const { return sign() == 0; }
    bool is_integer() const { return q_.get_den() == 1; }

    double to_double() const { return q_.get_d(); }

    /// Largest integer <= value. Throws when it does not fit in int64.
    std::int64_t floor() const
    {
        mpz_class f;
        mpz_fdiv_q(f.get_mpz_t(), q_.get_num_mpz_t(), q_.get_den_mpz_t());
        return to_int64(f);
    }

    std::int64_t ceil() const
    {
        mpz_class c;
        mpz_cdiv_q(c.get_mpz_t(), q_.get_num_mpz_t(), q_.get_den_mpz_t());
        return to_int64(c);
    }

    /// Round half away from zero.
    std::int64_t round() const
    {
        Rational half(1, 2);
        return sign() >= 0 ? (*this + half).floor() : (*this - half).ceil();
    }

    std::string to_string() const { return q_.get_str(10); }

    const mpq_class& raw() const { return q_; }

    Rational& operator+=(const Rational& o) { q_ += o.q_; return *this; }
    Rational& operator-=(const Rational& o) { q_ -= o.q_; return *this; }
    Rational& operator*=(const Rational& o) { q_ *= o.q_; return *this; }
    Rational& operator/=(const Rational& o)
    {
        if (o.is_zero())
            fail(ErrorKind::Invariant, "rational division by zero");
        q_ /= o.q_;
        return *this;
    }

    friend Rational operator+(Rational a, const Rational& b) { return a += b; }
    friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
    friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
    friend Rational operator/(Rational a, const Rational& b) { return a /= b; }
    friend Rational operator-(Rational a) { a.q_ = -a.q_; return a; }

    friend int compare(const Rational& a, const Rational& b) { return cmp(a.q_, b.q_); }
    friend bool operator==(const Rational& a, const Rational& b) { return a.q_ == b.q_; }
    friend bool operator!=(const Rational& a, const Rational& b) { return a.q_ != b.q_; }
    friend bool operator<(const Rational& a, const Rational& b) { return a.q_ < b.q_; }
    friend bool operator<=(const Rational& a, const Rational& b) { return a.q_ <= b.q_; }
    friend bool operator>(const Rational& a, const Rational& b) { return a.q_ > b.q_; }
    friend bool operator>=(const Rational& a, const Rational& b) { return a.q_ >= b.q_; }

    friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.to_string(); }

private:
    static std::int64_t to_int64(const mpz_class& z)
    {
        if (!z.fits_slong_p())
            fail(ErrorKind::Invariant, "rational out of int64 range");
        return z.get_si();
    }

    mpq_class q_;
};

inline const Rational& min(const Rational& a, const Rational& b) { return b < a ? b : a; }
inline const Rational& max(const Rational& a, const Rational& b) { return a < b ? b : a; }

/// Non-negative exact utilization. Subtraction below zero is a ledger
/// corruption, never a clamp.
class Bandwidth {
public:
    Bandwidth() = default;
    explicit Bandwidth(Rational v) : v_(std::move(v))
    {
        if (v_.sign() < 0)
            fail(ErrorKind::LedgerCorruption, "negative bandwidth " + v_.to_string());
    }
    Bandwidth(std::int64_t num, std::int64_t den) : Bandwidth(Rational(num, den)) {}

    static Bandwidth parse(std::string_view text) { return Bandwidth(Rational::parse(text)); }

    const Rational& value() const { return v_; }
    bool is_zero() const { return v_.is_zero(); }
    double to_double() const { return v_.to_double(); }
    std::string to_string() const { return v_.to_string(); }

    Bandwidth& operator+=(const Bandwidth& o) { v_ += o.v_; return *this; }
    Bandwidth& operator-=(const Bandwidth& o)
    {
        if (o.v_ > v_)
            fail(ErrorKind::LedgerCorruption,
                 "bandwidth underflow: " + v_.to_string() + " - " + o.v_.to_string());
        v_ -= o.v_;
        return *this;
    }

    friend Bandwidth operator+(Bandwidth a, const Bandwidth& b) { return a += b; }
    friend Bandwidth operator-(Bandwidth a, const Bandwidth& b) { return a -= b; }

    friend bool operator==(const Bandwidth& a, const Bandwidth& b) { return a.v_ == b.v_; }
    friend bool operator!=(const Bandwidth& a, const Bandwidth& b) { return a.v_ != b.v_; }
    friend bool operator<(const Bandwidth& a, const Bandwidth& b) { return a.v_ < b.v_; }
    friend bool operator<=(const Bandwidth& a, const Bandwidth& b) { return a.v_ <= b.v_; }
    friend bool operator>(const Bandwidth& a, const Bandwidth& b) { return a.v_ > b.v_; }
    friend bool operator>=(const Bandwidth& a, const Bandwidth& b) { return a.v_ >= b.v_; }

    friend std::ostream& operator<<(std::ostream& os, const Bandwidth& b) { return os << b.v_; }

private:
    Rational v_;
};

inline Bandwidth bandwidth_add(const Bandwidth& a, const Bandwidth& b) { return a + b; }
inline Bandwidth bandwidth_sub(const Bandwidth& a, const Bandwidth& b) { return a - b; }
inline int bandwidth_cmp(const Bandwidth& a, const Bandwidth& b) { return compare(a.value(), b.value()); }

/// 1 - b, which is the residual capacity of a core whose load is b.
/// Negative residuals are meaningful in admission tests, so this returns a Rational.
inline Rational residual(const Rational& load) { return Rational(1) - load; }

} // namespace grubsim
