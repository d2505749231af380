#pragma once

// Lagrange coded computing: l secrets packed into one degree-(l+t-1)
// polynomial per coordinate, t random pads, n evaluation points.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "secfpp/field.hpp"
#include "secfpp/poly.hpp"
#include "secfpp/rng.hpp"

namespace secfpp {

// floor(alpha * n), with a small guard so alpha = 1/3, n = 3 gives 1.
inline size_t privacy_threshold(size_t n, double alpha) {
  return static_cast<size_t>(std::floor(alpha * static_cast<double>(n) + 1e-9));
}

// Largest l keeping degree-2 products decodable: 2(l+t-1)+1 <= n.
inline size_t default_ell(size_t n, size_t t) {
  const long v = (static_cast<long>(n) - 2 * static_cast<long>(t) + 1) / 2;
  return static_cast<size_t>(std::max(1L, v));
}

// floor((n-t)/2); only valid for degree-1 (aggregation-only) use.
inline size_t linear_ell(size_t n, size_t t) { return n > t ? (n - t) / 2 : 0; }

struct LccParams {
  size_t n = 0;
  size_t t = 0;
  size_t ell = 1;
  int degree_cap = 2;
  FieldVector interp_points;  // beta_1..beta_{l+t}
  FieldVector eval_points;    // alpha_1..alpha_n

  size_t code_degree() const { return ell + t - 1; }

  // beta = {1..l+t}, alpha = {l+t+1..l+t+n}
  static LccParams make(const PrimeField& field, size_t n, size_t t, size_t ell, int degree_cap) {
    LccParams p;
    p.n = n;
    p.t = t;
    p.ell = ell;
    p.degree_cap = degree_cap;
    for (size_t k = 0; k < ell + t; ++k) p.interp_points.push_back(field.element(k + 1));
    for (size_t j = 0; j < n; ++j) p.eval_points.push_back(field.element(ell + t + j + 1));
    p.validate(field);
    return p;
  }

  void validate(const PrimeField& field) const {
    if (ell < 1) throw Error(ErrorCode::BadParams, "ell must be >= 1");
    if (n < 1) throw Error(ErrorCode::BadParams, "need at least one holder");
    if (degree_cap < 1) throw Error(ErrorCode::BadParams, "degree cap must be >= 1");
    if (interp_points.size() != ell + t || eval_points.size() != n) {
      throw Error(ErrorCode::BadParams, "point set sizes do not match (n, t, ell)");
    }
    if (ell + t + n >= field.modulus()) throw Error(ErrorCode::BadParams, "field too small for point sets");
    std::vector<u64> all;
    for (auto e : interp_points) all.push_back(e.value);
    for (auto e : eval_points) all.push_back(e.value);
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end()) {
      throw Error(ErrorCode::BadParams, "interpolation and evaluation points collide");
    }
    const size_t needed = static_cast<size_t>(degree_cap) * code_degree() + 1;
    if (needed > n) {
      throw Error(ErrorCode::BadParams, "degree cap violated: " + std::to_string(degree_cap) + "*(ell+t-1)+1 = " +
                                            std::to_string(needed) + " exceeds n = " + std::to_string(n));
    }
  }
};

struct ShareBundle {
  size_t holder = 0;
  FieldVector values;
};

// Partition into l contiguous pieces of length ceil(dim/l), zero padded.
inline std::vector<FieldVector> slice_vector(std::span<const FieldElement> v, size_t ell) {
  if (ell == 0) throw Error(ErrorCode::BadParams, "ell must be >= 1");
  const size_t width = (v.size() + ell - 1) / ell;
  std::vector<FieldVector> out(ell, FieldVector(width));
  for (size_t i = 0; i < v.size(); ++i) out[i / width][i % width] = v[i];
  return out;
}

inline FieldVector unslice(std::span<const FieldVector> slices, size_t dim) {
  FieldVector out;
  out.reserve(dim);
  for (const auto& s : slices) {
    for (auto e : s) {
      if (out.size() == dim) return out;
      out.push_back(e);
    }
  }
  if (out.size() != dim) throw Error(ErrorCode::ShapeMismatch, "slices shorter than requested dimension");
  return out;
}

namespace detail {

// coeffs[r][c] = L_c(targets[r]) for the Lagrange basis over `nodes`.
inline std::vector<FieldVector> lagrange_matrix(const PrimeField& f, std::span<const FieldElement> nodes,
                                                std::span<const FieldElement> targets) {
  const size_t m = nodes.size();
  FieldVector inv_w(m);
  for (size_t c = 0; c < m; ++c) {
    FieldElement w{1};
    for (size_t i = 0; i < m; ++i) {
      if (i != c) w = f.mul(w, f.sub(nodes[c], nodes[i]));
    }
    inv_w[c] = f.inv(w);
  }
  std::vector<FieldVector> out(targets.size(), FieldVector(m));
  for (size_t r = 0; r < targets.size(); ++r) {
    const FieldElement z = targets[r];
    auto hit = std::find(nodes.begin(), nodes.end(), z);
    if (hit != nodes.end()) {
      out[r][static_cast<size_t>(hit - nodes.begin())] = FieldElement{1};
      continue;
    }
    FieldElement full{1};
    for (size_t i = 0; i < m; ++i) full = f.mul(full, f.sub(z, nodes[i]));
    for (size_t c = 0; c < m; ++c) out[r][c] = f.mul(f.mul(full, f.inv(f.sub(z, nodes[c]))), inv_w[c]);
  }
  return out;
}

inline FieldVector apply_rows(const PrimeField& f, const FieldVector& row, std::span<const FieldVector* const> cols,
                              size_t dim) {
  FieldVector out(dim);
  for (size_t c = 0; c < row.size(); ++c) {
    if (row[c].value == 0) continue;
    const FieldVector& v = *cols[c];
    for (size_t x = 0; x < dim; ++x) out[x] = f.add(out[x], f.mul(row[c], v[x]));
  }
  return out;
}

}  // namespace detail

// Encoder with precomputed Lagrange coefficients for one parameter set.
class LccCode {
 public:
  LccCode(PrimeField field, LccParams params) : field_(field), params_(std::move(params)) {
    params_.validate(field_);
    encoder_ = detail::lagrange_matrix(field_, params_.interp_points, params_.eval_points);
  }

  const PrimeField& field() const { return field_; }
  const LccParams& params() const { return params_; }

  std::vector<ShareBundle> share(std::span<const FieldVector> secrets, Rng& rng) const {
    if (secrets.size() != params_.ell) {
      throw Error(ErrorCode::BadParams, "expected " + std::to_string(params_.ell) + " secrets, got " +
                                            std::to_string(secrets.size()));
    }
    const size_t dim = secrets.front().size();
    for (const auto& s : secrets) {
      if (s.size() != dim) throw Error(ErrorCode::ShapeMismatch, "secret slices differ in dimension");
    }
    std::vector<FieldVector> pads(params_.t, FieldVector(dim));
    for (auto& pad : pads) {
      for (auto& e : pad) e = rng.uniform(field_);
    }
    std::vector<const FieldVector*> cols;
    for (const auto& s : secrets) cols.push_back(&s);
    for (const auto& p : pads) cols.push_back(&p);

    std::vector<ShareBundle> out(params_.n);
    for (size_t j = 0; j < params_.n; ++j) {
      out[j].holder = j;
      out[j].values = detail::apply_rows(field_, encoder_[j], cols, dim);
    }
    return out;
  }

  // Erasure decoding of a degree-`degree` codeword; returns the values at
  // beta_1..beta_l. Shares beyond degree+1 are checked for consistency.
  std::vector<FieldVector> recon(std::span<const ShareBundle> shares, size_t degree) const {
    auto sorted = ordered(shares);
    if (sorted.size() < degree + 1) {
      throw Error(ErrorCode::InsufficientShares, "need " + std::to_string(degree + 1) + " shares, have " +
                                                     std::to_string(sorted.size()));
    }
    const size_t dim = sorted.front()->values.size();
    FieldVector nodes;
    std::vector<const FieldVector*> cols;
    for (size_t i = 0; i <= degree; ++i) {
      nodes.push_back(params_.eval_points[sorted[i]->holder]);
      cols.push_back(&sorted[i]->values);
    }
    if (sorted.size() > degree + 1) {
      FieldVector extra_pts;
      for (size_t i = degree + 1; i < sorted.size(); ++i) extra_pts.push_back(params_.eval_points[sorted[i]->holder]);
      auto check = detail::lagrange_matrix(field_, nodes, extra_pts);
      for (size_t i = 0; i < check.size(); ++i) {
        const auto predicted = detail::apply_rows(field_, check[i], cols, dim);
        if (predicted != sorted[degree + 1 + i]->values) {
          throw Error(ErrorCode::DegreeMismatch, "share of holder " + std::to_string(sorted[degree + 1 + i]->holder) +
                                                     " is inconsistent with a degree-" + std::to_string(degree) +
                                                     " polynomial");
        }
      }
    }
    auto targets = std::span<const FieldElement>(params_.interp_points).first(params_.ell);
    auto dec = detail::lagrange_matrix(field_, nodes, targets);
    std::vector<FieldVector> out;
    out.reserve(params_.ell);
    for (const auto& row : dec) out.push_back(detail::apply_rows(field_, row, cols, dim));
    return out;
  }

  struct RobustResult {
    std::vector<FieldVector> secrets;
    std::vector<size_t> corrupted_holders;
  };

  // Error-and-erasure decoding (Gao). Tolerates e bad shares when
  // shares >= degree + 1 + 2e.
  RobustResult recon_robust(std::span<const ShareBundle> shares, size_t degree) const {
    auto sorted = ordered(shares);
    const size_t m = sorted.size();
    const size_t k = degree + 1;
    if (m < k) {
      throw Error(ErrorCode::InsufficientShares, "need " + std::to_string(k) + " shares, have " + std::to_string(m));
    }
    const size_t dim = sorted.front()->values.size();
    FieldVector xs;
    for (const auto* s : sorted) xs.push_back(params_.eval_points[s->holder]);

    // fast path: interpolate on the first k and verify the rest per coordinate
    std::vector<const FieldVector*> cols;
    for (size_t i = 0; i < k; ++i) cols.push_back(&sorted[i]->values);
    auto targets = std::span<const FieldElement>(params_.interp_points).first(params_.ell);
    auto dec = detail::lagrange_matrix(field_, std::span(xs).first(k), targets);
    RobustResult result;
    for (const auto& row : dec) result.secrets.push_back(detail::apply_rows(field_, row, cols, dim));

    std::vector<char> dirty(dim, 0);
    if (m > k) {
      auto check = detail::lagrange_matrix(field_, std::span(xs).first(k), std::span(xs).subspan(k));
      for (size_t i = 0; i < check.size(); ++i) {
        const auto predicted = detail::apply_rows(field_, check[i], cols, dim);
        for (size_t c = 0; c < dim; ++c) {
          if (predicted[c] != sorted[k + i]->values[c]) dirty[c] = 1;
        }
      }
    }

    std::vector<char> bad(m, 0);
    FieldVector ys(m);
    for (size_t c = 0; c < dim; ++c) {
      if (!dirty[c]) continue;
      for (size_t i = 0; i < m; ++i) ys[i] = sorted[i]->values[c];
      auto msg = poly::gao_decode(field_, xs, ys, k);
      if (!msg) {
        throw Error(ErrorCode::DecodingFailure, "no degree-" + std::to_string(degree) +
                                                    " codeword within the error budget at coordinate " +
                                                    std::to_string(c));
      }
      for (size_t i = 0; i < m; ++i) {
        if (poly::eval(field_, *msg, xs[i]) != ys[i]) bad[i] = 1;
      }
      for (size_t s = 0; s < params_.ell; ++s) result.secrets[s][c] = poly::eval(field_, *msg, targets[s]);
    }
    for (size_t i = 0; i < m; ++i) {
      if (bad[i]) result.corrupted_holders.push_back(sorted[i]->holder);
    }
    return result;
  }

 private:
  std::vector<const ShareBundle*> ordered(std::span<const ShareBundle> shares) const {
    std::vector<const ShareBundle*> out;
    for (const auto& s : shares) {
      if (s.holder >= params_.n) throw Error(ErrorCode::BadParams, "holder index out of range");
      out.push_back(&s);
    }
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->holder < b->holder; });
    for (size_t i = 1; i < out.size(); ++i) {
      if (out[i]->holder == out[i - 1]->holder) throw Error(ErrorCode::BadParams, "duplicate holder in share set");
      if (out[i]->values.size() != out[0]->values.size()) {
        throw Error(ErrorCode::ShapeMismatch, "share vectors differ in dimension");
      }
    }
    if (out.empty()) throw Error(ErrorCode::InsufficientShares, "no shares supplied");
    return out;
  }

  PrimeField field_;
  LccParams params_;
  std::vector<FieldVector> encoder_;
};

inline std::vector<ShareBundle> share(std::span<const FieldVector> secrets, const LccParams& params,
                                      const PrimeField& field, Rng& rng) {
  return LccCode(field, params).share(secrets, rng);
}

inline std::vector<FieldVector> recon(std::span<const ShareBundle> shares, size_t degree, const LccParams& params,
                                      const PrimeField& field) {
  return LccCode(field, params).recon(shares, degree);
}

inline LccCode::RobustResult recon_robust(std::span<const ShareBundle> shares, size_t degree,
                                          const LccParams& params, const PrimeField& field) {
  return LccCode(field, params).recon_robust(shares, degree);
}

}  // namespace secfpp
