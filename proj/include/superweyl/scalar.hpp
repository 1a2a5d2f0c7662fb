#pragma once

// Scalar rings for the super symbol calculus.
//
// ExactScalar   : Laurent polynomial in the formal parameter hbar with
//                 Gaussian-rational coefficients (arbitrary precision).
// NumericScalar : Laurent polynomial in hbar with complex<double> coefficients.
//
// All fiber-calculus identities are checked over ExactScalar; NumericScalar
// is the boundary type for curved-geometry data.

#include <boost/multiprecision/cpp_int.hpp>
#include <complex>
#include <cstdint>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace superweyl {

using BigRat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// ---------------------------------------------------------------------------
// Gaussian rationals a + b i
// ---------------------------------------------------------------------------
struct GaussRat {
  BigRat re{0}, im{0};

  GaussRat() = default;
  GaussRat(int v) : re(v) {}                       // NOLINT implicit
  GaussRat(long long v) : re(v) {}                 // NOLINT implicit
  GaussRat(BigRat r) : re(std::move(r)) {}         // NOLINT implicit
  GaussRat(BigRat r, BigRat i_) : re(std::move(r)), im(std::move(i_)) {}
  static GaussRat i() { return GaussRat(BigRat(0), BigRat(1)); }
  static GaussRat ratio(long long p, long long q) { return GaussRat(BigRat(p) / q); }

  bool is_zero() const { return re == 0 && im == 0; }
  bool is_real() const { return im == 0; }

  friend GaussRat operator+(const GaussRat& a, const GaussRat& b) {
    return {a.re + b.re, a.im + b.im};
  }
  friend GaussRat operator-(const GaussRat& a, const GaussRat& b) {
    return {a.re - b.re, a.im - b.im};
  }
  friend GaussRat operator-(const GaussRat& a) { return {-a.re, -a.im}; }
  friend GaussRat operator*(const GaussRat& a, const GaussRat& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }
  friend bool operator==(const GaussRat& a, const GaussRat& b) {
    return a.re == b.re && a.im == b.im;
  }
  friend bool operator!=(const GaussRat& a, const GaussRat& b) { return !(a == b); }

  GaussRat& operator+=(const GaussRat& b) { *this = *this + b; return *this; }
  GaussRat& operator-=(const GaussRat& b) { *this = *this - b; return *this; }
  GaussRat& operator*=(const GaussRat& b) { *this = *this * b; return *this; }

  GaussRat inverse() const {
    BigRat n = re * re + im * im;
    if (n == 0) throw std::domain_error("GaussRat: division by zero");
    return {re / n, -im / n};
  }

  std::complex<double> to_complex() const {
    return {static_cast<double>(re), static_cast<double>(im)};
  }

  friend std::ostream& operator<<(std::ostream& os, const GaussRat& g) {
    if (g.im == 0) return os << g.re;
    if (g.re == 0) return os << g.im << " i";
    return os << "(" << g.re << " + " << g.im << " i)";
  }
};

// Exact square root of a nonnegative rational, if it is a perfect square.
inline bool exact_sqrt(const BigRat& x, BigRat& out) {
  if (x < 0) return false;
  BigInt num = numerator(x), den = denominator(x);
  BigInt sn = sqrt(num), sd = sqrt(den);
  if (sn * sn != num || sd * sd != den) return false;
  out = BigRat(sn) / BigRat(sd);
  return true;
}

// ---------------------------------------------------------------------------
// Laurent polynomials in hbar
// ---------------------------------------------------------------------------
template <class C>
struct Laurent {
  // exponent of hbar -> coefficient; no zero coefficients stored
  std::map<int, C> c;

  Laurent() = default;
  Laurent(int v) { if (v != 0) c[0] = C(v); }            // NOLINT implicit
  Laurent(C v) { if (!coeff_zero(v)) c[0] = std::move(v); }  // NOLINT implicit

  static bool coeff_zero(const C& v) {
    if constexpr (std::is_same_v<C, GaussRat>) return v.is_zero();
    else return v == C(0);
  }

  static Laurent coeff(C v, int k = 0) {
    Laurent out;
    if (!coeff_zero(v)) out.c[k] = std::move(v);
    return out;
  }
  static Laurent i() {
    if constexpr (std::is_same_v<C, GaussRat>) return coeff(GaussRat::i());
    else return coeff(C(0, 1));
  }
  static Laurent hbar(int k = 1) { return coeff(C(1), k); }
  // (i/hbar)^m and (-i hbar)^m show up everywhere
  static Laurent i_over_h() { return coeff(im_unit(), -1); }
  static Laurent neg_i_h() { return coeff(neg_im_unit(), 1); }

  static C im_unit() {
    if constexpr (std::is_same_v<C, GaussRat>) return GaussRat::i();
    else return C(0, 1);
  }
  static C neg_im_unit() {
    if constexpr (std::is_same_v<C, GaussRat>) return -GaussRat::i();
    else return C(0, -1);
  }

  bool is_zero() const { return c.empty(); }
  int min_degree() const { return c.empty() ? 0 : c.begin()->first; }
  int max_degree() const { return c.empty() ? 0 : c.rbegin()->first; }
  C at(int k) const {
    auto it = c.find(k);
    return it == c.end() ? C(0) : it->second;
  }

  Laurent shifted(int k) const {
    Laurent out;
    for (auto& [e, v] : c) out.c[e + k] = v;
    return out;
  }

  friend Laurent operator+(const Laurent& a, const Laurent& b) {
    Laurent out = a;
    for (auto& [e, v] : b.c) {
      auto it = out.c.find(e);
      if (it == out.c.end()) out.c[e] = v;
      else {
        it->second = it->second + v;
        if (coeff_zero(it->second)) out.c.erase(it);
      }
    }
    return out;
  }
  friend Laurent operator-(const Laurent& a) {
    Laurent out;
    for (auto& [e, v] : a.c) out.c[e] = -v;
    return out;
  }
  friend Laurent operator-(const Laurent& a, const Laurent& b) { return a + (-b); }
  friend Laurent operator*(const Laurent& a, const Laurent& b) {
    Laurent out;
    for (auto& [ea, va] : a.c)
      for (auto& [eb, vb] : b.c) {
        C p = va * vb;
        if (coeff_zero(p)) continue;
        auto it = out.c.find(ea + eb);
        if (it == out.c.end()) out.c[ea + eb] = p;
        else {
          it->second = it->second + p;
          if (coeff_zero(it->second)) out.c.erase(it);
        }
      }
    return out;
  }
  friend bool operator==(const Laurent& a, const Laurent& b) {
    if (a.c.size() != b.c.size()) return false;
    auto ia = a.c.begin();
    for (auto ib = b.c.begin(); ib != b.c.end(); ++ia, ++ib)
      if (ia->first != ib->first || !(ia->second == ib->second)) return false;
    return true;
  }
  friend bool operator!=(const Laurent& a, const Laurent& b) { return !(a == b); }
  Laurent& operator+=(const Laurent& b) { *this = *this + b; return *this; }
  Laurent& operator-=(const Laurent& b) { *this = *this - b; return *this; }
  Laurent& operator*=(const Laurent& b) { *this = *this * b; return *this; }

  // Invert a single-term Laurent scalar (all that the calculus ever needs).
  Laurent inverse() const {
    if (c.size() != 1) throw std::domain_error("Laurent: only monomial scalars invertible");
    auto& [e, v] = *c.begin();
    if constexpr (std::is_same_v<C, GaussRat>) return coeff(v.inverse(), -e);
    else return coeff(C(1.0) / v, -e);
  }

  // Substitute a numeric value for hbar.
  std::complex<double> eval_hbar(double h) const {
    std::complex<double> out = 0;
    for (auto& [e, v] : c) {
      std::complex<double> cv;
      if constexpr (std::is_same_v<C, GaussRat>) cv = v.to_complex();
      else cv = v;
      out += cv * std::pow(h, e);
    }
    return out;
  }

  friend std::ostream& operator<<(std::ostream& os, const Laurent& l) {
    if (l.c.empty()) return os << "0";
    bool first = true;
    for (auto& [e, v] : l.c) {
      if (!first) os << " + ";
      first = false;
      os << v;
      if (e != 0) os << " hbar^" << e;
    }
    return os;
  }
};

using ExactScalar = Laurent<GaussRat>;
using NumericScalar = Laurent<std::complex<double>>;

inline ExactScalar exact_rat(long long p, long long q = 1) {
  return ExactScalar::coeff(GaussRat::ratio(p, q));
}

inline NumericScalar numeric(double re, double im = 0.0) {
  return NumericScalar::coeff(std::complex<double>(re, im));
}

// ---------------------------------------------------------------------------
// Ring glue used by the Grassmann layer
// ---------------------------------------------------------------------------
template <class R>
struct ring {
  static R zero() { return R(0); }
  static R one() { return R(1); }
  static bool is_zero(const R& x) { return x == R(0); }
  static constexpr bool exact = false;
};

template <>
struct ring<GaussRat> {
  static GaussRat zero() { return GaussRat(0); }
  static GaussRat one() { return GaussRat(1); }
  static bool is_zero(const GaussRat& x) { return x.is_zero(); }
  static constexpr bool exact = true;
};

template <class C>
struct ring<Laurent<C>> {
  static Laurent<C> zero() { return Laurent<C>(); }
  static Laurent<C> one() { return Laurent<C>(1); }
  static bool is_zero(const Laurent<C>& x) { return x.is_zero(); }
  static constexpr bool exact = std::is_same_v<C, GaussRat>;
};

template <>
struct ring<std::complex<double>> {
  static std::complex<double> zero() { return {0, 0}; }
  static std::complex<double> one() { return {1, 0}; }
  static bool is_zero(const std::complex<double>& x) { return x == std::complex<double>(0, 0); }
  static constexpr bool exact = false;
};

// magnitude for tolerance checks on numeric rings
inline double ring_mag(const std::complex<double>& x) { return std::abs(x); }
inline double ring_mag(const NumericScalar& x) {
  double m = 0;
  for (auto& [e, v] : x.c) m = std::max(m, std::abs(v));
  return m;
}

// continued-fraction rationalization; returns false if no small fraction
// reproduces x to reltol
inline bool rationalize(double x, BigRat& out, double reltol = 1e-12,
                        long long max_den = 1000000) {
  if (!std::isfinite(x)) return false;
  double ax = std::abs(x);
  long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double v = ax;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(v);
    if (fl > 9e17) return false;
    long long a = static_cast<long long>(fl);
    long long p2 = a * p1 + p0, q2 = a * q1 + q0;
    if (q2 > max_den) return false;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    double approx = static_cast<double>(p1) / static_cast<double>(q1);
    if (std::abs(approx - ax) <= reltol * std::max(1.0, ax)) {
      out = BigRat(p1) / BigRat(q1);
      if (x < 0) out = -out;
      return true;
    }
    double rem = v - fl;
    if (rem < 1e-15) return false;
    v = 1.0 / rem;
  }
  return false;
}

}  // namespace superweyl
