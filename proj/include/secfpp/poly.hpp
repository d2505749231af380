#pragma once

// Dense univariate polynomials over F_q, low-order coefficient first.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "secfpp/field.hpp"

namespace secfpp::poly {

using Poly = std::vector<FieldElement>;

inline void trim(Poly& p) {
  while (!p.empty() && p.back().value == 0) p.pop_back();
}

// Degree of the zero polynomial is -1.
inline long degree(const Poly& p) {
  for (long i = static_cast<long>(p.size()) - 1; i >= 0; --i) {
    if (p[static_cast<size_t>(i)].value != 0) return i;
  }
  return -1;
}

inline FieldElement eval(const PrimeField& f, const Poly& p, FieldElement x) {
  FieldElement acc{0};
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = f.add(f.mul(acc, x), *it);
  return acc;
}

inline Poly add(const PrimeField& f, const Poly& a, const Poly& b) {
  Poly r(std::max(a.size(), b.size()));
  for (size_t i = 0; i < r.size(); ++i) {
    FieldElement x = i < a.size() ? a[i] : FieldElement{0};
    FieldElement y = i < b.size() ? b[i] : FieldElement{0};
    r[i] = f.add(x, y);
  }
  trim(r);
  return r;
}

inline Poly sub(const PrimeField& f, const Poly& a, const Poly& b) {
  Poly r(std::max(a.size(), b.size()));
  for (size_t i = 0; i < r.size(); ++i) {
    FieldElement x = i < a.size() ? a[i] : FieldElement{0};
    FieldElement y = i < b.size() ? b[i] : FieldElement{0};
    r[i] = f.sub(x, y);
  }
  trim(r);
  return r;
}

inline Poly mul(const PrimeField& f, const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1);
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].value == 0) continue;
    for (size_t j = 0; j < b.size(); ++j) r[i + j] = f.add(r[i + j], f.mul(a[i], b[j]));
  }
  trim(r);
  return r;
}

// Returns (quotient, remainder).
inline std::pair<Poly, Poly> divmod(const PrimeField& f, Poly a, Poly b) {
  trim(a);
  trim(b);
  if (b.empty()) throw Error(ErrorCode::DivisionByZero, "polynomial division by zero");
  if (a.size() < b.size()) return {Poly{}, a};
  const FieldElement lead_inv = f.inv(b.back());
  Poly q(a.size() - b.size() + 1);
  for (size_t shift = a.size() - b.size() + 1; shift-- > 0;) {
    const FieldElement coef = f.mul(a[shift + b.size() - 1], lead_inv);
    q[shift] = coef;
    if (coef.value != 0) {
      for (size_t j = 0; j < b.size(); ++j) a[shift + j] = f.sub(a[shift + j], f.mul(coef, b[j]));
    }
  }
  trim(q);
  trim(a);
  return {q, a};
}

inline Poly from_roots(const PrimeField& f, std::span<const FieldElement> roots) {
  Poly r{FieldElement{1}};
  for (auto x : roots) r = mul(f, r, Poly{f.neg(x), FieldElement{1}});
  return r;
}

// Newton-form interpolation converted to monomial coefficients.
inline Poly interpolate(const PrimeField& f, std::span<const FieldElement> xs, std::span<const FieldElement> ys) {
  const size_t m = xs.size();
  std::vector<FieldElement> coef(ys.begin(), ys.end());
  for (size_t level = 1; level < m; ++level) {
    for (size_t i = m - 1; i >= level; --i) {
      coef[i] = f.div(f.sub(coef[i], coef[i - 1]), f.sub(xs[i], xs[i - level]));
      if (i == level) break;
    }
  }
  Poly r;
  for (size_t i = m; i-- > 0;) {
    r = mul(f, r, Poly{f.neg(xs[i]), FieldElement{1}});
    r = add(f, r, Poly{coef[i]});
  }
  trim(r);
  return r;
}

// Gao's decoder for a Reed-Solomon code of dimension k (message polynomials
// of degree < k) evaluated at xs. Returns the message polynomial when the
// received word is within distance floor((m - k) / 2) of a codeword.
inline std::optional<Poly> gao_decode(const PrimeField& f, std::span<const FieldElement> xs,
                                      std::span<const FieldElement> ys, size_t k) {
  const size_t m = xs.size();
  if (k == 0 || m < k) return std::nullopt;
  Poly g0 = from_roots(f, xs);
  Poly g1 = interpolate(f, xs, ys);
  if (degree(g1) < static_cast<long>(k)) return g1;

  // partial extended Euclid on (g0, g1), tracking only the g1 cofactor
  Poly r_prev = std::move(g0), r_cur = std::move(g1);
  Poly v_prev{}, v_cur{FieldElement{1}};
  const double stop = (static_cast<double>(m) + static_cast<double>(k)) / 2.0;
  while (static_cast<double>(degree(r_cur)) >= stop) {
    auto [quot, rem] = divmod(f, r_prev, r_cur);
    Poly v_next = sub(f, v_prev, mul(f, quot, v_cur));
    r_prev = std::move(r_cur);
    r_cur = std::move(rem);
    v_prev = std::move(v_cur);
    v_cur = std::move(v_next);
  }
  if (v_cur.empty()) return std::nullopt;
  auto [msg, rem] = divmod(f, r_cur, v_cur);
  if (!rem.empty() || degree(msg) >= static_cast<long>(k)) return std::nullopt;
  return msg;
}

}  // namespace secfpp::poly
