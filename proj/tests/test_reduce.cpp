#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "secfpp/reduce.hpp"
#include "secfpp/rng.hpp"

using namespace secfpp;

namespace {

// One-sided Jacobi: rotate column pairs of A until orthogonal; column norms
// are then the singular values.
std::vector<double> jacobi_singular_values(Eigen::MatrixXd a) {
  if (a.rows() < a.cols()) a.transposeInPlace();
  const Eigen::Index n = a.cols();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = a.col(p).squaredNorm(), beta = a.col(q).squaredNorm();
        const double gamma = a.col(p).dot(a.col(q));
        if (std::fabs(gamma) < 1e-300) continue;
        off = std::max(off, std::fabs(gamma) / std::sqrt(alpha * beta));
        const double zeta = (beta - alpha) / (2 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1 + zeta * zeta));
        const double c = 1 / std::sqrt(1 + t * t), s = c * t;
        Eigen::VectorXd cp = a.col(p);
        a.col(p) = c * cp - s * a.col(q);
        a.col(q) = s * cp + c * a.col(q);
      }
    }
    if (off < 1e-15) break;
  }
  std::vector<double> sv;
  for (Eigen::Index j = 0; j < n; ++j) sv.push_back(a.col(j).norm());
  std::sort(sv.rbegin(), sv.rend());
  return sv;
}

PromptMatrix random_prompt(Rng& rng, Eigen::Index k, Eigen::Index d) {
  PromptMatrix p(k, d);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal();
  return p;
}

}  // namespace

TEST(Reduce, FlattenIsTokenMajor) {
  PromptMatrix p(2, 3);
  p << 1, 2, 3, 4, 5, 6;
  const auto v = flatten(p);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(v(i), i + 1);
  EXPECT_EQ(unflatten(v, 2, 3), p);
}

TEST(Reduce, BasisRowsOrthonormal) {
  const auto b = make_shared_basis(7, 120, 8);
  const Eigen::MatrixXd g = b.rows * b.rows.transpose();
  EXPECT_LT((g - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Reduce, BasisDeterministic) {
  const auto a = make_shared_basis(7, 32, 5), b = make_shared_basis(7, 32, 5);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.id, b.id);
  EXPECT_NE(make_shared_basis(8, 32, 5).id, a.id);
}

TEST(Reduce, RankExceeded) {
  try {
    (void)make_shared_basis(1, 4, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankExceeded);
  }
}

TEST(Reduce, FullRankIsIsometry) {
  Rng rng(1);
  const auto b = make_shared_basis(3, 12, 12);
  const auto p1 = random_prompt(rng, 3, 4), p2 = random_prompt(rng, 3, 4);
  const double red = (reduce_prompt(p1, b).coords - reduce_prompt(p2, b).coords).norm();
  EXPECT_NEAR(red, (p1 - p2).norm(), 1e-10);
  EXPECT_EQ(reduce_prompt(PromptMatrix::Zero(3, 4), b).coords.norm(), 0.0);
}

TEST(Reduce, ShapeMismatch) {
  const auto b = make_shared_basis(3, 12, 4);
  try {
    (void)reduce_prompt(PromptMatrix::Zero(2, 5), b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Reduce, Linearity) {
  Rng rng(2);
  const auto b = make_shared_basis(3, 32, 8);
  const auto p1 = random_prompt(rng, 4, 8), p2 = random_prompt(rng, 4, 8);
  const PromptMatrix mix = 2.5 * p1 - 0.75 * p2;
  const Eigen::VectorXd lhs = reduce_prompt(mix, b).coords;
  const Eigen::VectorXd rhs = 2.5 * reduce_prompt(p1, b).coords - 0.75 * reduce_prompt(p2, b).coords;
  EXPECT_LT((lhs - rhs).norm(), 1e-12);
}

// Scaled by d/r, projected squared distances concentrate around the true
// ones; with r = 8 a pair may deviate by a factor of a few but the average
// ratio stays near one.
TEST(Reduce, RandomProjectionDistortion) {
  Rng rng(3);
  const Eigen::Index d = 120, r = 8;
  const auto b = make_shared_basis(11, d, r);
  double mean_ratio = 0;
  const int pairs = 100;
  for (int k = 0; k < pairs; ++k) {
    const auto p1 = random_prompt(rng, 4, 30), p2 = random_prompt(rng, 4, 30);
    const double full = (p1 - p2).squaredNorm();
    const double red = (reduce_prompt(p1, b).coords - reduce_prompt(p2, b).coords).squaredNorm() * d / r;
    const double ratio = red / full;
    // chi-square(8)/8 has its 1e-4 tails near 0.09 and 3.4
    EXPECT_GT(ratio, 0.05);
    EXPECT_LT(ratio, 4.0);
    mean_ratio += ratio / pairs;
  }
  EXPECT_NEAR(mean_ratio, 1.0, 0.15);
}

TEST(Svd, DiagonalExample) {
  PromptMatrix p = PromptMatrix::Zero(3, 3);
  p.diagonal() << 3, 2, 1;
  const auto s = truncated_svd(p, 2);
  EXPECT_NEAR(s.sigma(0), 3, 1e-12);
  EXPECT_NEAR(s.sigma(1), 2, 1e-12);
  EXPECT_NEAR((p - s.reconstruct()).norm(), 1.0, 1e-12);
}

TEST(Svd, RankOneExact) {
  Eigen::VectorXd u(4), v(6);
  u << 1, -2, 0.5, 3;
  v << 0.1, 0.2, -1, 2, 0, 4;
  const PromptMatrix p = u * v.transpose();
  const auto s = truncated_svd(p, 1);
  EXPECT_LT((p - s.reconstruct()).norm(), 1e-12);
  const auto s3 = truncated_svd(p, 3);
  EXPECT_NEAR(s3.sigma(1), 0.0, 1e-12);
}

TEST(Svd, MatchesJacobiOracleAndEckartYoung) {
  Rng rng(4);
  const auto p = random_prompt(rng, 15, 64);
  const auto oracle = jacobi_singular_values(p);
  for (Eigen::Index r : {1, 4, 8, 15}) {
    const auto s = truncated_svd(p, r);
    for (Eigen::Index i = 0; i < r; ++i) EXPECT_NEAR(s.sigma(i), oracle[static_cast<std::size_t>(i)], 1e-9);
    double tail = 0;
    for (std::size_t i = static_cast<std::size_t>(r); i < oracle.size(); ++i) tail += oracle[i] * oracle[i];
    const double resid = (p - s.reconstruct()).squaredNorm();
    EXPECT_NEAR(resid, tail, 1e-6);
    // no random rank-r competitor does better
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::MatrixXd q = random_prompt(rng, 15, r);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
      Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(15, r);
      const double other = (p - basis * basis.transpose() * p).squaredNorm();
      EXPECT_GE(other, resid - 1e-9);
    }
  }
}

TEST(Svd, RankBeyondShapeRejected) {
  EXPECT_THROW((void)truncated_svd(PromptMatrix::Zero(3, 5), 4), Error);
}

TEST(Svd, BasisFromSvdIsOrthonormal) {
  Rng rng(5);
  const auto p = random_prompt(rng, 4, 8);
  const auto b = basis_from_svd(p, 8);
  const Eigen::MatrixXd g = b.rows * b.rows.transpose();
  EXPECT_LT((g - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-10);
  // leading direction reproduces the top singular value
  EXPECT_NEAR(std::fabs(reduce_prompt(p, b).coords(0)), truncated_svd(p, 1).sigma(0), 1e-9);
}
