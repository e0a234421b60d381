#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace vertexcalc {

/// Exact rational number. Always kept in canonical form: gcd(|num|, den) = 1,
/// den > 0, zero is 0/1. Backed by GMP so intermediate quotient computations
/// never overflow.
class Rat {
  public:
    Rat() : v_(0) {}
    Rat(long n) : v_(n) {}
    Rat(long n, long d) : v_(n, d) { v_.canonicalize(); }
    explicit Rat(const mpq_class& q) : v_(q) { v_.canonicalize(); }
    explicit Rat(const mpz_class& n) : v_(n) {}

    /// Parses "p", "-p" or "p/q". Throws std::invalid_argument on junk.
    static Rat parse(std::string_view s);

    bool is_zero() const { return sgn(v_) == 0; }
    bool is_one() const { return v_ == 1; }
    int sign() const { return sgn(v_); }

    mpz_class num() const { return v_.get_num(); }
    mpz_class den() const { return v_.get_den(); }

    Rat& operator+=(const Rat& o) { v_ += o.v_; return *this; }
    Rat& operator-=(const Rat& o) { v_ -= o.v_; return *this; }
    Rat& operator*=(const Rat& o) { v_ *= o.v_; return *this; }
    Rat& operator/=(const Rat& o);

    friend Rat operator+(Rat a, const Rat& b) { return a += b; }
    friend Rat operator-(Rat a, const Rat& b) { return a -= b; }
    friend Rat operator*(Rat a, const Rat& b) { return a *= b; }
    friend Rat operator/(Rat a, const Rat& b) { return a /= b; }
    friend Rat operator-(const Rat& a) { Rat r; r.v_ = -a.v_; return r; }

    friend bool operator==(const Rat& a, const Rat& b) { return a.v_ == b.v_; }
    friend bool operator!=(const Rat& a, const Rat& b) { return a.v_ != b.v_; }
    friend bool operator<(const Rat& a, const Rat& b) { return a.v_ < b.v_; }

    Rat inverse() const;

    /// "p" when the denominator is 1, otherwise "p/q".
    std::string str() const;

    friend std::ostream& operator<<(std::ostream& os, const Rat& r);

  private:
    mpq_class v_;
};

/// n^k for k >= 0 as an exact integer-valued rational.
Rat rat_pow(const Rat& base, unsigned k);

/// Exact factorial as a rational (integer-valued).
Rat factorial(unsigned k);

}  // namespace vertexcalc
