#pragma once

// Exact rational / big-integer helpers shared by every module.
// All quantities that enter an inequality check are kept rational; floating
// point appears only in the log2 views.

#include <gmpxx.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace mfa {

using Int = mpz_class;
using Rat = mpq_class;

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline Int pow2z(unsigned long e) {
  Int r;
  mpz_ui_pow_ui(r.get_mpz_t(), 2, e);
  return r;
}

// 2^e for any sign of e.
inline Rat pow2(long e) {
  if (e >= 0) return Rat(pow2z(static_cast<unsigned long>(e)));
  Rat r(1, pow2z(static_cast<unsigned long>(-e)));
  r.canonicalize();
  return r;
}

inline Int floor_rat(const Rat& q) {
  Int r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

inline Int ceil_rat(const Rat& q) {
  Int r;
  mpz_cdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

inline Rat rat_pow(const Rat& base, unsigned long e) {
  Rat r;
  mpz_pow_ui(r.get_num_mpz_t(), base.get_num_mpz_t(), e);
  mpz_pow_ui(r.get_den_mpz_t(), base.get_den_mpz_t(), e);
  return r;  // canonical since base is
}

// base^e for integer e of any sign; base != 0 when e < 0.
inline Rat rat_pow_int(const Rat& base, const Int& e) {
  Int mag = abs(e);
  if (!mag.fits_ulong_p()) throw Error("exponent too large");
  if (e >= 0) return rat_pow(base, e.get_ui());
  if (base == 0) throw Error("zero base with negative exponent");
  Rat inv(base.get_den(), base.get_num());
  inv.canonicalize();
  return rat_pow(inv, mag.get_ui());
}

// sign of x - y^e for positive rationals x, y and rational exponent e.
// Reduced to integer powers: x <=> y^(a/b)  iff  x^b <=> y^a   (b > 0).
inline int cmp_rat_pow(const Rat& x, const Rat& y, const Rat& e) {
  if (sgn(x) <= 0 || sgn(y) <= 0) throw Error("cmp_rat_pow needs positive arguments");
  Int a = e.get_num(), b = e.get_den();
  if (!b.fits_ulong_p()) throw Error("exponent denominator too large");
  Rat lhs = rat_pow(x, b.get_ui());
  Rat rhs = rat_pow_int(y, a);
  return cmp(lhs, rhs);
}

// Accurate log2 of a positive rational, good to ~1 ulp even for huge values.
inline double log2_rat(const Rat& q) {
  if (sgn(q) <= 0) throw Error("log2 of non-positive rational");
  signed long en = 0, ed = 0;
  double mn = mpz_get_d_2exp(&en, q.get_num_mpz_t());
  double md = mpz_get_d_2exp(&ed, q.get_den_mpz_t());
  return (std::log2(mn) + static_cast<double>(en)) -
         (std::log2(md) + static_cast<double>(ed));
}

inline double log2_int(const Int& z) {
  if (sgn(z) <= 0) throw Error("log2 of non-positive integer");
  signed long e = 0;
  double m = mpz_get_d_2exp(&e, z.get_mpz_t());
  return std::log2(m) + static_cast<double>(e);
}

inline double rat_to_double(const Rat& q) { return q.get_d(); }

// "a/b" or "a"; also accepts a leading minus. Throws on anything else.
inline Rat parse_rat(const std::string& s) {
  auto bad = [&] { throw Error("bad rational '" + s + "'"); };
  if (s.empty()) bad();
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) bad();
  bool seen_slash = false, digit_before = false, digit_after = false;
  for (std::size_t t = i; t < s.size(); ++t) {
    char c = s[t];
    if (c == '/') {
      if (seen_slash || !digit_before) bad();
      seen_slash = true;
    } else if (c >= '0' && c <= '9') {
      (seen_slash ? digit_after : digit_before) = true;
    } else {
      bad();
    }
  }
  if (!digit_before || (seen_slash && !digit_after)) bad();
  Rat q;
  if (mpq_set_str(q.get_mpq_t(), s.c_str() + (s[0] == '+' ? 1 : 0), 10) != 0) bad();
  if (q.get_den() == 0) throw Error("zero denominator in '" + s + "'");
  q.canonicalize();
  return q;
}

inline std::string rat_str(const Rat& q) { return q.get_str(); }

// Fixed-significant-digit formatting; the single formatting path keeps CLI
// output byte-reproducible.
inline std::string fmt_g(double v, int sig = 12) {
  if (v == 0) v = 0;  // normalize -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", sig, v);
  return buf;
}

inline std::string rat_decimal(const Rat& q, int sig = 12) {
  return fmt_g(rat_to_double(q), sig);
}

}  // namespace mfa
