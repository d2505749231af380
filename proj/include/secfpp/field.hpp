#pragma once

// Prime-field arithmetic and the fixed-point embedding of reals into F_q.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "secfpp/error.hpp"

namespace secfpp {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

struct FieldElement {
  u64 value = 0;

  friend constexpr auto operator<=>(const FieldElement&, const FieldElement&) = default;
};

using FieldVector = std::vector<FieldElement>;

namespace detail {

inline u64 mulmod(u64 a, u64 b, u64 m) { return static_cast<u64>((static_cast<u128>(a) * b) % m); }

inline u64 powmod(u64 base, u64 exp, u64 m) {
  u64 result = 1 % m;
  base %= m;
  while (exp > 0) {
    if (exp & 1U) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    exp >>= 1U;
  }
  return result;
}

}  // namespace detail

// Deterministic Miller-Rabin; the witness set is exact for all 64-bit inputs.
inline bool is_prime(u64 n) {
  if (n < 2) return false;
  for (u64 p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  u64 d = n - 1;
  int s = 0;
  while ((d & 1U) == 0) {
    d >>= 1U;
    ++s;
  }
  for (u64 a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    u64 x = detail::powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = detail::mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

// Smallest prime strictly greater than n.
inline u64 next_prime(u64 n) {
  u64 c = n + 1;
  if (c <= 2) return 2;
  if ((c & 1U) == 0) ++c;
  while (!is_prime(c)) c += 2;
  return c;
}

// Moduli are capped so that a + b never wraps a u64 and a * b fits in u128.
inline constexpr u64 kMaxModulus = u64{1} << 62;

class PrimeField {
 public:
  explicit PrimeField(u64 modulus) : q_(modulus) {
    if (modulus < 3 || modulus >= kMaxModulus || !is_prime(modulus)) {
      throw Error(ErrorCode::BadParams, "field modulus must be an odd prime below 2^62, got " +
                                            std::to_string(modulus));
    }
  }

  u64 modulus() const noexcept { return q_; }

  FieldElement element(u64 v) const noexcept { return {v % q_}; }
  FieldElement from_signed(std::int64_t v) const noexcept {
    auto r = v % static_cast<std::int64_t>(q_);
    if (r < 0) r += static_cast<std::int64_t>(q_);
    return {static_cast<u64>(r)};
  }

  FieldElement add(FieldElement a, FieldElement b) const noexcept {
    u64 s = a.value + b.value;
    return {s >= q_ ? s - q_ : s};
  }
  FieldElement sub(FieldElement a, FieldElement b) const noexcept {
    return {a.value >= b.value ? a.value - b.value : a.value + q_ - b.value};
  }
  FieldElement neg(FieldElement a) const noexcept { return {a.value == 0 ? 0 : q_ - a.value}; }
  FieldElement mul(FieldElement a, FieldElement b) const noexcept {
    return {detail::mulmod(a.value, b.value, q_)};
  }
  FieldElement pow(FieldElement a, u64 e) const noexcept { return {detail::powmod(a.value, e, q_)}; }

  FieldElement inv(FieldElement a) const {
    if (a.value == 0) throw Error(ErrorCode::DivisionByZero, "inverse of zero");
    // extended Euclid on signed 128-bit to stay exact for q < 2^62
    __int128 t = 0, new_t = 1;
    __int128 r = q_, new_r = a.value;
    while (new_r != 0) {
      __int128 quotient = r / new_r;
      __int128 tmp = t - quotient * new_t;
      t = new_t;
      new_t = tmp;
      tmp = r - quotient * new_r;
      r = new_r;
      new_r = tmp;
    }
    if (t < 0) t += q_;
    return {static_cast<u64>(t)};
  }

  FieldElement div(FieldElement a, FieldElement b) const { return mul(a, inv(b)); }

  friend bool operator==(const PrimeField&, const PrimeField&) = default;

 private:
  u64 q_;
};

// lambda scales reals before flooring; eta bounds every scaled entry to
// [-eta, eta) in field units.
struct QuantConfig {
  u64 lambda = 1000;
  double eta = 0.0;

  // eta is derived from the largest magnitude the caller will ever quantize.
  static QuantConfig for_bound(u64 lambda, double max_abs) {
    if (lambda < 1) throw Error(ErrorCode::BadParams, "lambda must be >= 1");
    if (!(max_abs > 0)) throw Error(ErrorCode::BadParams, "max-abs bound must be positive");
    return QuantConfig{lambda, static_cast<double>(lambda) * max_abs};
  }

  void validate(const PrimeField& field) const {
    if (lambda < 1) throw Error(ErrorCode::BadParams, "lambda must be >= 1");
    if (!(eta > 0)) throw Error(ErrorCode::BadParams, "eta must be positive");
    if (2.0 * eta >= static_cast<double>(field.modulus())) {
      throw Error(ErrorCode::BadParams, "2*eta must be below the field modulus");
    }
  }
};

inline FieldElement quantize(double x, const QuantConfig& cfg, const PrimeField& field) {
  const double scaled = static_cast<double>(cfg.lambda) * x;
  if (!std::isfinite(scaled) || std::fabs(scaled) >= cfg.eta) {
    throw Error(ErrorCode::RangeExceeded,
                "|lambda*x| = " + std::to_string(std::fabs(scaled)) + " >= eta = " + std::to_string(cfg.eta));
  }
  const auto floored = static_cast<std::int64_t>(std::floor(scaled));
  // floor(q + lambda*x) == q + floor(lambda*x) for integral q
  return field.from_signed(floored);
}

inline FieldVector quantize(std::span<const double> x, const QuantConfig& cfg, const PrimeField& field) {
  cfg.validate(field);
  FieldVector out;
  out.reserve(x.size());
  for (double v : x) out.push_back(quantize(v, cfg, field));
  return out;
}

// Decodes a residue whose integer preimage has magnitude below
// `magnitude_bound` (field units). Values outside both images are ambiguous.
inline double dequantize(FieldElement v, const QuantConfig& cfg, const PrimeField& field, int degree,
                         double magnitude_bound) {
  const u64 q = field.modulus();
  const double half = static_cast<double>((q + 1) / 2);
  const double bound = std::min(magnitude_bound, half);
  const double scale = std::pow(static_cast<double>(cfg.lambda), degree);
  if (static_cast<double>(v.value) < bound) return static_cast<double>(v.value) / scale;
  if (static_cast<double>(q - v.value) < bound) {
    return -static_cast<double>(q - v.value) / scale;
  }
  throw Error(ErrorCode::AmbiguousValue, "residue " + std::to_string(v.value) +
                                             " lies between the positive and negative images");
}

// Default image bound for a degree-k value is eta^k, capped at the midpoint
// so that residues >= ceil(q/2) decode as negative.
inline double dequantize(FieldElement v, const QuantConfig& cfg, const PrimeField& field, int degree) {
  return dequantize(v, cfg, field, degree, std::pow(cfg.eta, degree));
}

inline std::vector<double> dequantize(std::span<const FieldElement> v, const QuantConfig& cfg,
                                      const PrimeField& field, int degree) {
  std::vector<double> out;
  out.reserve(v.size());
  for (auto e : v) out.push_back(dequantize(e, cfg, field, degree));
  return out;
}

inline std::vector<double> dequantize(std::span<const FieldElement> v, const QuantConfig& cfg,
                                      const PrimeField& field, int degree, double magnitude_bound) {
  std::vector<double> out;
  out.reserve(v.size());
  for (auto e : v) out.push_back(dequantize(e, cfg, field, degree, magnitude_bound));
  return out;
}

// Smallest admissible modulus lower bound 2*lambda^2*D, where D bounds every
// squared distance the protocol evaluates in real units.
inline u64 min_modulus(u64 lambda, double max_sq_distance) {
  const long double v = 2.0L * static_cast<long double>(lambda) * static_cast<long double>(lambda) *
                        static_cast<long double>(max_sq_distance);
  if (v >= static_cast<long double>(std::numeric_limits<u64>::max())) {
    throw Error(ErrorCode::BadParams, "modulus bound exceeds 64 bits");
  }
  return static_cast<u64>(std::ceil(v));
}

inline constexpr u64 kDefaultLambda = 1000;
inline constexpr u64 kModulusFloor = 10'000'000'000ULL;

// Default modulus: smallest prime above max(10^10, 2*lambda^2*D).
inline PrimeField default_field(u64 lambda, double max_sq_distance) {
  const u64 lower = std::max(kModulusFloor, min_modulus(lambda, max_sq_distance));
  const u64 q = next_prime(lower);
  if (q >= kMaxModulus) {
    throw Error(ErrorCode::BadParams, "required modulus " + std::to_string(q) + " exceeds 2^62");
  }
  return PrimeField(q);
}

}  // namespace secfpp
