#pragma once

// Per-phase cost measurement of one secure round on synthetic reduced
// prompts, plus the least-squares trend fits reported next to it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "secfpp/cluster.hpp"
#include "secfpp/lcc.hpp"
#include "secfpp/parallel.hpp"
#include "secfpp/protocol.hpp"
#include "secfpp/transcript.hpp"

namespace secfpp {

struct BenchRecord {
  std::size_t n = 0;
  std::size_t d = 0;
  std::string phase;  // share | distance | decode | aggregate | server-cluster
  double wall_time = 0;
  std::size_t bytes_sent = 0;
};

struct BenchConfig {
  std::vector<std::size_t> n_values{10, 20, 40};
  std::vector<std::size_t> d_values{150, 500, 1000, 2000, 4000};
  double alpha = 1.0 / 3.0;
  std::size_t k_clusters = 2;
  std::size_t repeats = 5;
  u64 lambda = kDefaultLambda;
  u64 seed = 1;
  std::size_t threads = 1;

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::BadConfig, m); };
    if (n_values.empty() || d_values.empty()) bad("bench grid is empty");
    for (auto n : n_values) {
      if (n < 2) bad("bench n must be >= 2 (a single user has no federation)");
      if (privacy_threshold(n, alpha) < 1) bad("alpha*n must be >= 1 for every bench n");
      if (k_clusters > n) bad("k_clusters must not exceed n");
    }
    for (auto d : d_values) {
      if (d < 1) bad("bench d must be >= 1");
    }
    if (repeats < 5) bad("repeats must be >= 5");
    if (k_clusters < 1) bad("k_clusters must be >= 1");
  }
};

struct BenchPoint {
  std::size_t n = 0, d = 0, ell = 0, t = 0, k = 0;
  PhaseTimes median;  // seconds, whole round summed over parties
  std::size_t share_bytes_per_user = 0;
  std::size_t distance_bytes_per_user = 0;
  std::size_t aggregate_bytes_per_user = 0;

  // one user's own work: sharing its prompt plus its holder-side distances
  double user_seconds() const { return (median.share + median.distance) / static_cast<double>(n); }
  std::size_t expected_bytes() const { return 8 * ((n - 1) * ((d + ell - 1) / ell) + k * n); }
};

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

inline BenchPoint bench_point(std::size_t n, std::size_t d, const BenchConfig& cfg) {
  const std::size_t t = privacy_threshold(n, cfg.alpha);
  const std::size_t ell = default_ell(n, t);
  const double bound = 1.0;
  RunConfig rc;
  rc.n = n;
  rc.r_reduced = d;
  rc.k_tokens = 1;
  rc.d_embed = d;
  rc.value_bound = bound;
  rc.lambda = cfg.lambda;
  rc.alpha = cfg.alpha;
  const PrimeField f = rc.make_field();
  LccCode code(f, LccParams::make(f, n, t, ell, 2));
  const QuantConfig quant = QuantConfig::for_bound(cfg.lambda, bound);

  Rng rng(mix_seed(cfg.seed, n * 1000003ULL + d));
  std::vector<Eigen::VectorXd> prompts(n, Eigen::VectorXd(static_cast<Eigen::Index>(d)));
  std::vector<Eigen::VectorXd> grads(n, Eigen::VectorXd(static_cast<Eigen::Index>(d)));
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(d); ++a) {
      prompts[i](a) = 0.9 * (2 * rng.uniform01() - 1);
      grads[i](a) = 0.9 * (2 * rng.uniform01() - 1);
    }
  }
  ClusterAssignment s;
  s.clusters.resize(cfg.k_clusters);
  for (std::size_t i = 0; i < n; ++i) s.clusters[i % cfg.k_clusters].push_back(i);
  AdaptiveConfig acfg;

  BenchPoint pt{n, d, ell, t, cfg.k_clusters, {}, 0, 0, 0};
  std::vector<double> sh, di, de, ag, sc;
  for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
    PhaseTimes times;
    Transcript tr;
    tr.set_policy({n, ell, t});
    SecpcContext ctx{&code, quant, &tr, rep, {}, false, cfg.threads, &times};
    auto held = share_prompts(prompts, ctx, [&](std::size_t i) { return Rng(mix_seed(rep, i)); });
    (void)secpc_round(held, s, acfg, ctx);
    AggregateContext actx{&code, quant, bound, &tr, rep, {}, false, cfg.threads, &times};
    secure_aggregate(grads, s, actx, [&](std::size_t i) { return Rng(mix_seed(rep + 77, i)); });
    sh.push_back(times.share);
    di.push_back(times.distance);
    de.push_back(times.decode);
    ag.push_back(times.aggregate);
    sc.push_back(times.server_cluster);
    if (rep == 0) {
      for (const auto& r : tr.records()) {
        if (r.sender != 0) continue;
        if (r.kind == kind::kPromptShare) pt.share_bytes_per_user += r.size_bytes;
        if (r.kind == kind::kDistanceShare) pt.distance_bytes_per_user += r.size_bytes;
        if (r.kind == kind::kGradientShare || r.kind == kind::kAggregateShare) {
          pt.aggregate_bytes_per_user += r.size_bytes;
        }
      }
    }
  }
  pt.median = {median_of(sh), median_of(di), median_of(de), median_of(ag), median_of(sc)};
  return pt;
}

inline std::vector<BenchRecord> to_records(const BenchPoint& p) {
  return {{p.n, p.d, "share", p.median.share, p.share_bytes_per_user},
          {p.n, p.d, "distance", p.median.distance, p.distance_bytes_per_user},
          {p.n, p.d, "decode", p.median.decode, 0},
          {p.n, p.d, "aggregate", p.median.aggregate, p.aggregate_bytes_per_user},
          {p.n, p.d, "server-cluster", p.median.server_cluster, 0}};
}

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::BadParams, "fit needs >= 2 paired points");
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += e * e;
  }
  f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

struct BenchReport {
  std::vector<BenchPoint> points;
  LinearFit user_vs_nd;
  LinearFit decode_vs_kn2log2n;
  bool bytes_match = true;
};

inline BenchReport run_bench(const BenchConfig& cfg) {
  cfg.validate();
  BenchReport rep;
  std::vector<double> nd, user, knl, dec;
  for (auto n : cfg.n_values) {
    for (auto d : cfg.d_values) {
      auto p = bench_point(n, d, cfg);
      nd.push_back(static_cast<double>(n * d));
      user.push_back(p.user_seconds());
      const double ln = std::log2(static_cast<double>(n));
      knl.push_back(static_cast<double>(p.k * n * n) * ln * ln);
      dec.push_back(p.median.decode);
      if (p.share_bytes_per_user + p.distance_bytes_per_user != p.expected_bytes()) rep.bytes_match = false;
      rep.points.push_back(p);
    }
  }
  rep.user_vs_nd = least_squares(nd, user);
  rep.decode_vs_kn2log2n = least_squares(knl, dec);
  return rep;
}

}  // namespace secfpp
