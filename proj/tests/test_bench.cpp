#include <gtest/gtest.h>

#include <sstream>

#include "secfpp/bench.hpp"
#include "secfpp/io.hpp"

using namespace secfpp;

TEST(LeastSquares, ExactLine) {
  const auto f = least_squares({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_THROW((void)least_squares({1}, {1}), Error);
}

TEST(LeastSquares, KnownResidual) {
  // y = x with one point displaced: hand-computed fit
  const auto f = least_squares({0, 1, 2}, {0, 2, 2});
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0 / 3, 1e-12);
  // SS_res = 2/3, SS_tot = 8/3
  EXPECT_NEAR(f.r2, 0.75, 1e-12);
}

TEST(Bench, PerUserBytesMatchFormula) {
  BenchConfig cfg;
  cfg.repeats = 5;
  for (std::size_t n : {6, 10}) {
    for (std::size_t d : {7, 40}) {
      const auto p = bench_point(n, d, cfg);
      const std::size_t ell = default_ell(n, privacy_threshold(n, cfg.alpha));
      EXPECT_EQ(p.ell, ell);
      EXPECT_EQ(p.share_bytes_per_user, 8 * (n - 1) * ((d + ell - 1) / ell));
      EXPECT_EQ(p.distance_bytes_per_user, 8 * cfg.k_clusters * n);
      EXPECT_EQ(p.share_bytes_per_user + p.distance_bytes_per_user, p.expected_bytes());
    }
  }
}

TEST(Bench, DistanceWorkGrowsWithDimension) {
  BenchConfig cfg;
  cfg.repeats = 7;
  const auto small = bench_point(10, 1000, cfg), big = bench_point(10, 4000, cfg);
  const double ratio = big.median.distance / small.median.distance;
  // linear in d with constant overheads; a 4x input should cost well over 2x
  EXPECT_GT(ratio, 2.0) << ratio;
  EXPECT_LT(ratio, 8.0) << ratio;
}

TEST(Bench, ConfigValidation) {
  BenchConfig cfg;
  cfg.n_values = {1};
  EXPECT_THROW(cfg.validate(), Error);
  cfg.n_values = {10};
  cfg.repeats = 2;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.repeats = 5;
  cfg.k_clusters = 11;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Bench, CsvLayout) {
  BenchConfig cfg;
  cfg.n_values = {6};
  cfg.d_values = {10, 20};
  const auto rep = run_bench(cfg);
  EXPECT_TRUE(rep.bytes_match);
  std::ostringstream os;
  write_bench_csv(os, rep);
  EXPECT_EQ(os.str().rfind("n,d,phase,wall_time,bytes_sent\n", 0), 0U);
  std::istringstream is(os.str());
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  EXPECT_EQ(lines, 1 + 2 * 5);
}
