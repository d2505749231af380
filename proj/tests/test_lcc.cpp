#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <numeric>

#include "secfpp/lcc.hpp"
#include "secfpp/poly.hpp"
#include "secfpp/rng.hpp"

using namespace secfpp;

namespace {

u64 mm(u64 a, u64 b, u64 q) { return static_cast<u64>(static_cast<unsigned __int128>(a) * b % q); }
u64 pw(u64 a, u64 e, u64 q) {
  u64 r = 1;
  while (e) {
    if (e & 1) r = mm(r, a, q);
    a = mm(a, a, q);
    e >>= 1;
  }
  return r;
}

// Textbook Lagrange evaluation at x from points (xs, ys), inverses by Fermat.
u64 lagrange_at(const std::vector<u64>& xs, const std::vector<u64>& ys, u64 x, u64 q) {
  u64 acc = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    u64 num = 1, den = 1;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (i == j) continue;
      num = mm(num, (x + q - xs[j]) % q, q);
      den = mm(den, (xs[i] + q - xs[j]) % q, q);
    }
    acc = (acc + mm(ys[i], mm(num, pw(den, q - 2, q), q), q)) % q;
  }
  return acc;
}

std::vector<FieldVector> random_secrets(Rng& rng, const PrimeField& f, std::size_t ell, std::size_t dim) {
  std::vector<FieldVector> s(ell, FieldVector(dim));
  for (auto& v : s) {
    for (auto& e : v) e = rng.uniform(f);
  }
  return s;
}

}  // namespace

TEST(Lcc, DefaultEllSatisfiesDegreeTwoBound) {
  for (std::size_t n = 3; n <= 60; ++n) {
    const std::size_t t = privacy_threshold(n, 1.0 / 3);
    if (t < 1) continue;
    const std::size_t l = default_ell(n, t);
    EXPECT_GE(l, 1U);
    if (n >= 2 * t + 1) EXPECT_LE(2 * (l + t - 1) + 1, n) << n;
  }
  EXPECT_EQ(privacy_threshold(3, 1.0 / 3), 1U);
  EXPECT_EQ(privacy_threshold(20, 1.0 / 3), 6U);
}

TEST(Lcc, SharesMatchIndependentLagrange) {
  const PrimeField f(next_prime(kModulusFloor));
  Rng rng(5);
  const std::size_t n = 13, t = 3, ell = 3;
  LccCode code(f, LccParams::make(f, n, t, ell, 2));
  auto secrets = random_secrets(rng, f, ell, 4);
  auto bundles = code.share(secrets, rng);
  const u64 q = f.modulus();
  // any deg+1 shares, extended by the oracle to the beta points, recover the secrets
  std::vector<u64> xs, ys;
  for (std::size_t j = 2; j < 2 + ell + t; ++j) xs.push_back(code.params().eval_points[j].value);
  for (std::size_t c = 0; c < 4; ++c) {
    ys.clear();
    for (std::size_t j = 2; j < 2 + ell + t; ++j) ys.push_back(bundles[j].values[c].value);
    for (std::size_t k = 0; k < ell; ++k) {
      EXPECT_EQ(lagrange_at(xs, ys, code.params().interp_points[k].value, q), secrets[k][c].value);
    }
    // and every other share lies on the same polynomial
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_EQ(lagrange_at(xs, ys, code.params().eval_points[j].value, q), bundles[j].values[c].value);
    }
  }
}

TEST(Lcc, NoPrivacyDegenerateIsConstant) {
  const PrimeField f(97);
  LccCode code(f, LccParams::make(f, 4, 0, 1, 1));
  Rng rng(1);
  std::vector<FieldVector> s{{FieldElement{42}, FieldElement{7}}};
  for (const auto& b : code.share(s, rng)) EXPECT_EQ(b.values, s[0]);
}

TEST(Lcc, SmallFieldExample) {
  const PrimeField f(97);
  LccCode code(f, LccParams::make(f, 3, 1, 1, 1));
  Rng rng(123);
  std::vector<FieldVector> s{{FieldElement{5}}};
  auto b = code.share(s, rng);
  for (std::size_t drop = 0; drop < 3; ++drop) {
    std::vector<ShareBundle> two;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j != drop) two.push_back(b[j]);
    }
    EXPECT_EQ(code.recon(two, 1)[0][0].value, 5U);
  }
}

TEST(Lcc, SquareOnSharesDecodesAtDoubleDegree) {
  const PrimeField f(next_prime(kModulusFloor));
  LccCode code(f, LccParams::make(f, 5, 1, 1, 2));
  Rng rng(2);
  std::vector<FieldVector> s{{FieldElement{3}}};
  auto b = code.share(s, rng);
  for (auto& x : b) x.values[0] = f.mul(x.values[0], x.values[0]);
  EXPECT_EQ(code.recon(b, 2)[0][0].value, 9U);
}

TEST(Lcc, LinearityOfShareSums) {
  const PrimeField f(next_prime(kModulusFloor));
  LccCode code(f, LccParams::make(f, 11, 2, 3, 2));
  Rng rng(3);
  auto a = random_secrets(rng, f, 3, 5), c = random_secrets(rng, f, 3, 5);
  auto sa = code.share(a, rng), sc = code.share(c, rng);
  for (std::size_t j = 0; j < sa.size(); ++j) {
    for (std::size_t x = 0; x < 5; ++x) sa[j].values[x] = f.add(sa[j].values[x], sc[j].values[x]);
  }
  auto out = code.recon(sa, code.params().code_degree());
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t x = 0; x < 5; ++x) EXPECT_EQ(out[k][x], f.add(a[k][x], c[k][x]));
  }
}

TEST(Lcc, RoundTripAndErasures) {
  const PrimeField f(next_prime(kModulusFloor));
  Rng rng(4);
  for (int it = 0; it < 100; ++it) {
    const std::size_t ell = 1 + rng.next_u64() % 4, t = 1 + rng.next_u64() % 5;
    const std::size_t deg = ell + t - 1;
    const std::size_t n = deg + 1 + rng.next_u64() % 8;
    LccCode code(f, LccParams::make(f, n, t, ell, 1));
    auto s = random_secrets(rng, f, ell, 1 + rng.next_u64() % 16);
    auto b = code.share(s, rng);
    EXPECT_EQ(code.recon(b, deg), s);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    std::vector<ShareBundle> kept;
    for (std::size_t k = 0; k <= deg; ++k) kept.push_back(b[idx[k]]);
    EXPECT_EQ(code.recon(kept, deg), s);
  }
}

TEST(Lcc, InconsistentExtraShareIsDegreeMismatch) {
  const PrimeField f(next_prime(kModulusFloor));
  LccCode code(f, LccParams::make(f, 7, 1, 2, 1));
  Rng rng(6);
  auto b = code.share(random_secrets(rng, f, 2, 3), rng);
  b[6].values[1] = f.add(b[6].values[1], FieldElement{1});
  try {
    (void)code.recon(b, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegreeMismatch);
  }
}

TEST(Lcc, TooFewSharesIsInsufficient) {
  const PrimeField f(next_prime(kModulusFloor));
  LccCode code(f, LccParams::make(f, 7, 2, 2, 1));
  Rng rng(7);
  auto b = code.share(random_secrets(rng, f, 2, 3), rng);
  b.resize(3);
  try {
    (void)code.recon(b, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientShares);
  }
}

TEST(Lcc, RobustDecodingIdentifiesCorruption) {
  const PrimeField f(next_prime(kModulusFloor));
  Rng rng(8);
  for (int it = 0; it < 50; ++it) {
    const std::size_t ell = 1 + rng.next_u64() % 3, t = 1 + rng.next_u64() % 3, e = 1 + rng.next_u64() % 2;
    const std::size_t deg = ell + t - 1, n = deg + 1 + 2 * e;
    LccCode code(f, LccParams::make(f, n, t, ell, 1));
    auto s = random_secrets(rng, f, ell, 3);
    auto b = code.share(s, rng);
    EXPECT_EQ(code.recon_robust(b, deg).secrets, s);
    EXPECT_TRUE(code.recon_robust(b, deg).corrupted_holders.empty());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    std::vector<std::size_t> bad(idx.begin(), idx.begin() + static_cast<long>(e));
    std::sort(bad.begin(), bad.end());
    for (auto j : bad) b[j].values[rng.next_u64() % 3] = rng.uniform(f);
    auto res = code.recon_robust(b, deg);
    EXPECT_EQ(res.secrets, s);
    std::vector<std::size_t> got(res.corrupted_holders.begin(), res.corrupted_holders.end());
    std::sort(got.begin(), got.end());
    // a random overwrite can coincide with the true value; reported holders must be a subset
    for (auto j : got) EXPECT_TRUE(std::binary_search(bad.begin(), bad.end(), j));
  }
}

TEST(Lcc, OverBudgetErrorsFailToDecode) {
  const PrimeField f(next_prime(kModulusFloor));
  LccCode code(f, LccParams::make(f, 5, 1, 1, 1));
  Rng rng(9);
  auto b = code.share(random_secrets(rng, f, 1, 1), rng);
  // budget is floor((5-2)/2) = 1; corrupt three holders
  const u64 delta[3] = {1, 5, 2};
  for (std::size_t j = 0; j < 3; ++j) b[j].values[0] = f.add(b[j].values[0], FieldElement{delta[j]});
  try {
    (void)code.recon_robust(b, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DecodingFailure);
  }
}

TEST(Lcc, DegreeCapViolationRejected) {
  const PrimeField f(next_prime(kModulusFloor));
  try {
    (void)LccParams::make(f, 10, 3, 4, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadParams);
  }
}

TEST(Lcc, SliceExamples) {
  FieldVector v6{{1}, {2}, {3}, {4}, {5}, {6}};
  auto s6 = slice_vector(v6, 2);
  ASSERT_EQ(s6.size(), 2U);
  EXPECT_EQ(s6[0].size(), 3U);
  FieldVector v5{{1}, {2}, {3}, {4}, {5}};
  auto s5 = slice_vector(v5, 2);
  ASSERT_EQ(s5[1].size(), 3U);
  EXPECT_EQ(s5[1][2].value, 0U);
  EXPECT_EQ(unslice(s5, 5), v5);
  EXPECT_EQ(unslice(s6, 6), v6);
}

// Two different secrets, the same t holders: each joint view, binned, must
// look uniform under a chi-square test at significance 0.01.
TEST(Lcc, ColludingViewIsUniform) {
  const PrimeField f(next_prime(kModulusFloor));
  const std::size_t n = 10, t = 3, ell = 2, trials = 20000, bins = 4;
  LccCode code(f, LccParams::make(f, n, t, ell, 1));
  Rng rng(10);
  const std::vector<std::vector<std::size_t>> coalitions{{0, 1, 2}, {3, 7, 9}};
  for (const auto& coal : coalitions) {
    for (u64 secret : {0ULL, 123456789ULL}) {
      std::vector<double> counts(64, 0.0);
      std::vector<FieldVector> s{{FieldElement{secret}}, {FieldElement{secret / 3}}};
      for (std::size_t k = 0; k < trials; ++k) {
        auto b = code.share(s, rng);
        std::size_t cell = 0;
        for (auto j : coal) {
          cell = cell * bins +
                 static_cast<std::size_t>(static_cast<long double>(b[j].values[0].value) * bins / f.modulus());
        }
        counts[cell] += 1;
      }
      const double expect = static_cast<double>(trials) / 64;
      double stat = 0;
      for (double c : counts) stat += (c - expect) * (c - expect) / expect;
      const double p = boost::math::gamma_q(63 / 2.0, stat / 2.0);
      EXPECT_GT(p, 0.01) << "coalition starting " << coal[0] << " secret " << secret;
    }
  }
}

TEST(Poly, GaoDecodesWithinRadius) {
  const PrimeField f(10007);
  poly::Poly p{{3}, {1}, {4}};
  FieldVector xs, ys;
  for (u64 x = 1; x <= 9; ++x) {
    xs.push_back({x});
    ys.push_back(poly::eval(f, p, {x}));
  }
  ys[2] = f.add(ys[2], {5});
  ys[6] = f.add(ys[6], {1});
  ys[7] = f.add(ys[7], {9});
  auto got = poly::gao_decode(f, xs, ys, 3);
  ASSERT_TRUE(got.has_value());
  auto g = *got;
  poly::trim(g);
  EXPECT_EQ(g, p);
}
