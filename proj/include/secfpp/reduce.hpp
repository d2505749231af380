#pragma once

// Dimension reduction for prompt matrices. Users project onto one shared
// orthonormal basis so their reduced coordinates are comparable.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "secfpp/error.hpp"
#include "secfpp/rng.hpp"

namespace secfpp {

// k_tokens x d_embed
using PromptMatrix = Eigen::MatrixXd;

// token-major: all embedding entries of token 0, then token 1, ...
inline Eigen::VectorXd flatten(const PromptMatrix& p) {
  Eigen::VectorXd v(p.size());
  for (Eigen::Index a = 0; a < p.rows(); ++a) {
    for (Eigen::Index b = 0; b < p.cols(); ++b) v(a * p.cols() + b) = p(a, b);
  }
  return v;
}

inline PromptMatrix unflatten(const Eigen::VectorXd& v, Eigen::Index k_tokens, Eigen::Index d_embed) {
  if (v.size() != k_tokens * d_embed) throw Error(ErrorCode::ShapeMismatch, "flat vector has wrong length");
  PromptMatrix p(k_tokens, d_embed);
  for (Eigen::Index a = 0; a < k_tokens; ++a) {
    for (Eigen::Index b = 0; b < d_embed; ++b) p(a, b) = v(a * d_embed + b);
  }
  return p;
}

struct SharedBasis {
  Eigen::MatrixXd rows;  // r x d_total, orthonormal rows
  std::uint64_t id = 0;
};

struct ReducedPrompt {
  Eigen::VectorXd coords;
  std::uint64_t basis_id = 0;
};

namespace detail {

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) { return mix_seed(h ^ v, v); }

// Modified Gram-Schmidt with one reorthogonalization pass.
inline void orthonormalize_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < i; ++j) m.row(i) -= m.row(i).dot(m.row(j)) * m.row(j);
    }
    const double nrm = m.row(i).norm();
    if (!(nrm > 1e-12)) throw Error(ErrorCode::ConvergenceFailure, "degenerate draw during orthonormalization");
    m.row(i) /= nrm;
  }
}

}  // namespace detail

inline SharedBasis make_shared_basis(std::uint64_t seed, Eigen::Index d_total, Eigen::Index r) {
  if (r < 1 || r > d_total) {
    throw Error(ErrorCode::RankExceeded,
                "rank " + std::to_string(r) + " not in [1, " + std::to_string(d_total) + "]");
  }
  Rng rng(seed);
  Eigen::MatrixXd m(r, d_total);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < d_total; ++j) m(i, j) = rng.normal();
  }
  detail::orthonormalize_rows(m);
  std::uint64_t id = detail::hash_combine(seed, static_cast<std::uint64_t>(d_total));
  id = detail::hash_combine(id, static_cast<std::uint64_t>(r));
  return {std::move(m), id};
}

inline ReducedPrompt reduce_prompt(const PromptMatrix& p, const SharedBasis& basis) {
  if (p.size() != basis.rows.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "prompt has " + std::to_string(p.size()) + " entries, basis expects " +
                                              std::to_string(basis.rows.cols()));
  }
  return {basis.rows * flatten(p), basis.id};
}

struct TruncatedSvd {
  Eigen::VectorXd sigma;  // descending
  Eigen::MatrixXd u;      // k_tokens x r
  Eigen::MatrixXd v;      // d_embed x r

  PromptMatrix reconstruct() const { return u * sigma.asDiagonal() * v.transpose(); }
};

inline TruncatedSvd truncated_svd(const PromptMatrix& p, Eigen::Index r) {
  const Eigen::Index full = std::min(p.rows(), p.cols());
  if (r < 1 || r > full) {
    throw Error(ErrorCode::RankExceeded, "rank " + std::to_string(r) + " exceeds min(k_tokens, d_embed) = " +
                                             std::to_string(full));
  }
  if (!p.allFinite()) throw Error(ErrorCode::ShapeMismatch, "prompt contains non-finite entries");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(p, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "SVD did not converge");

  TruncatedSvd out{svd.singularValues().head(r), svd.matrixU().leftCols(r), svd.matrixV().leftCols(r)};
  // residual of the singular relations P v = sigma u, P^T u = sigma v
  const double scale = std::max(1.0, p.norm());
  const double res = std::max((p * out.v - out.u * out.sigma.asDiagonal()).norm(),
                              (p.transpose() * out.u - out.v * out.sigma.asDiagonal()).norm());
  if (res > 1e-8 * scale) {
    throw Error(ErrorCode::ConvergenceFailure, "singular triplet residual " + std::to_string(res) + " above 1e-8");
  }
  return out;
}

// Server-derived basis from one prompt's singular vectors: rows are
// flatten(u_a v_b^T), ordered by sigma_a*sigma_b (ties by (a, b)).
inline SharedBasis basis_from_svd(const PromptMatrix& p, Eigen::Index r) {
  const Eigen::Index d_total = p.size();
  if (r < 1 || r > d_total) {
    throw Error(ErrorCode::RankExceeded,
                "rank " + std::to_string(r) + " not in [1, " + std::to_string(d_total) + "]");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  auto sig = [&](Eigen::Index i) { return i < s.size() ? s(i) : 0.0; };
  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index a = 0; a < p.rows(); ++a) {
    for (Eigen::Index b = 0; b < p.cols(); ++b) pairs.emplace_back(-sig(a) * sig(b), a, b);
  }
  std::stable_sort(pairs.begin(), pairs.end());
  SharedBasis out;
  out.rows.resize(r, d_total);
  std::uint64_t id = 0x5eedULL;
  for (Eigen::Index i = 0; i < r; ++i) {
    auto [neg, a, b] = pairs[static_cast<size_t>(i)];
    PromptMatrix outer = svd.matrixU().col(a) * svd.matrixV().col(b).transpose();
    out.rows.row(i) = flatten(outer).transpose();
    id = detail::hash_combine(id, static_cast<std::uint64_t>(a * p.cols() + b));
  }
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    id = detail::hash_combine(id, static_cast<std::uint64_t>(std::llround(s(i) * 1e9)));
  }
  out.id = id;
  return out;
}

}  // namespace secfpp
