#pragma once

// Reduced-size oracle-equivalence and special-function suites behind
// `secfpp selftest`. Output carries no timings so reports are byte-stable.

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "secfpp/secfpp.hpp"

namespace secfpp::selftest {

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::string detail;
};

inline std::vector<Eigen::VectorXd> random_points(Rng& rng, std::size_t n, std::size_t dim, double scale) {
  std::vector<Eigen::VectorXd> p(n, Eigen::VectorXd(static_cast<Eigen::Index>(dim)));
  for (auto& v : p) {
    for (Eigen::Index a = 0; a < v.size(); ++a) v(a) = scale * (2 * rng.uniform01() - 1);
  }
  return p;
}

inline SuiteResult lcc_roundtrip() {
  SuiteResult r{"lcc-roundtrip", true, ""};
  const PrimeField f(next_prime(kModulusFloor));
  Rng rng(11);
  std::size_t cases = 0;
  for (int it = 0; it < 60; ++it) {
    const std::size_t ell = 1 + rng.next_u64() % 3, t = 1 + rng.next_u64() % 3;
    const std::size_t deg = ell + t - 1;
    const std::size_t n = deg + 1 + 2 + rng.next_u64() % 4;
    LccCode code(f, LccParams::make(f, n, t, ell, 1));
    const std::size_t dim = 1 + rng.next_u64() % 6;
    std::vector<FieldVector> secrets(ell, FieldVector(dim));
    for (auto& s : secrets) {
      for (auto& e : s) e = rng.uniform(f);
    }
    auto bundles = code.share(secrets, rng);
    // erase everything beyond deg + 1 holders
    std::vector<ShareBundle> kept(bundles.end() - static_cast<long>(deg + 1), bundles.end());
    if (code.recon(kept, deg) != secrets) r.pass = false;
    // one corrupted share with two spare holders
    auto bad = bundles;
    auto& victim = bad[rng.next_u64() % n].values[0];
    victim = f.add(victim, FieldElement{1});
    if (n >= deg + 3 && code.recon_robust(bad, deg).secrets != secrets) r.pass = false;
    ++cases;
  }
  r.detail = std::to_string(cases) + " instances";
  return r;
}

inline SuiteResult secpc_oracle() {
  SuiteResult r{"secpc-oracle", true, ""};
  std::size_t agree = 0, total = 0;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    RunConfig rc;
    rc.n = 8 + rng.next_u64() % 8;
    rc.k_tokens = 1;
    rc.d_embed = rc.r_reduced = 4 + rng.next_u64() % 5;
    const PrimeField f = rc.make_field();
    LccCode code(f, LccParams::make(f, rc.n, rc.t(), rc.resolved_ell(), 2));
    const QuantConfig quant = QuantConfig::for_bound(rc.lambda, rc.value_bound);
    // two well separated blobs under a random two-way split
    std::vector<Eigen::VectorXd> pts = random_points(rng, rc.n, rc.r_reduced, 0.05);
    for (std::size_t i = 0; i < rc.n; i += 2) pts[i].array() += 1.0;
    ClusterAssignment s;
    s.clusters = {{}, {}};
    for (std::size_t i = 0; i < rc.n; ++i) s.clusters[rng.next_u64() % 2].push_back(i);
    if (s.clusters[0].empty() || s.clusters[1].empty()) s = ClusterAssignment::single(rc.n);
    Transcript tr;
    tr.set_policy({rc.n, code.params().ell, code.params().t});
    SecpcContext ctx{&code, quant, &tr, 0, {}, false, 1, nullptr};
    AdaptiveConfig acfg;
    auto held = share_prompts(pts, ctx, [&](std::size_t i) { return Rng(mix_seed(seed, i)); });
    auto sec = secpc_round(held, s, acfg, ctx);
    auto ref = plaintext_oracle(pts, s, acfg);
    for (Eigen::Index a = 0; a < ref.distances.d.size(); ++a) {
      const double e = std::fabs(sec.distances.d(a) - ref.distances.d(a));
      worst = std::max(worst, e / std::max(1.0, ref.distances.d(a)));
    }
    ++total;
    if (sec.next == ref.next && audit_transcript(tr).pass) ++agree;
  }
  r.pass = agree == total && worst < 1e-2;
  r.detail = std::to_string(agree) + "/" + std::to_string(total) + " assignments equal, worst distance error " +
             fmt_double(worst);
  return r;
}

inline SuiteResult aggregate_oracle() {
  SuiteResult r{"aggregate-oracle", true, ""};
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed + 50);
    const std::size_t n = 6 + seed, t = privacy_threshold(n, 1.0 / 3), ell = default_ell(n, t);
    const PrimeField f(next_prime(kModulusFloor));
    LccCode code(f, LccParams::make(f, n, t, ell, 1));
    const QuantConfig quant = QuantConfig::for_bound(kDefaultLambda, 4.0);
    auto g = random_points(rng, n, 7, 1.0);
    ClusterAssignment s;
    s.clusters = {{}, {}};
    for (std::size_t i = 0; i < n; ++i) s.clusters[i % 2].push_back(i);
    AggregateContext actx{&code, quant, 4.0, nullptr, 0, {}, false, 1, nullptr};
    auto means = secure_aggregate(g, s, actx, [&](std::size_t i) { return Rng(mix_seed(seed, i)); });
    for (std::size_t c = 0; c < 2; ++c) {
      Eigen::VectorXd ref = Eigen::VectorXd::Zero(7);
      for (auto i : s.clusters[c]) ref += g[i];
      ref /= static_cast<double>(s.clusters[c].size());
      worst = std::max(worst, (means[c] - ref).cwiseAbs().maxCoeff());
    }
  }
  // floor quantization errs by at most 1/lambda per entry
  r.pass = worst <= 1.0 / kDefaultLambda;
  r.detail = "worst entry error " + fmt_double(worst);
  return r;
}

inline SuiteResult special_functions() {
  SuiteResult r{"special-functions", true, ""};
  double worst = 0;
  for (int m = 1; m <= 8; ++m) worst = std::max(worst, std::fabs(g_family(m, 0.0) - special::digamma(m)));
  for (int n = 1; n <= 15; n += 2) worst = std::max(worst, std::fabs(h_family(n, 0.0) - special::digamma(n / 2.0)));
  // closed forms against the series E[psi(a + K)], K ~ Poisson(xi)
  for (int m = 1; m <= 6; ++m) {
    for (double xi : {0.3, 1.0, 2.5, 7.0}) {
      worst = std::max(worst, std::fabs(g_family(m, xi) - poisson_digamma_mix(m, xi)));
    }
  }
  for (int n = 1; n <= 9; n += 2) {
    for (double xi : {0.3, 1.0, 2.5, 7.0}) {
      worst = std::max(worst, std::fabs(h_family(n, xi) - poisson_digamma_mix(n / 2.0, xi)));
    }
  }
  worst = std::max(worst, std::fabs(chi2_entropy(2) - (1 + std::log(2.0))));
  r.pass = worst < 1e-9;
  r.detail = "worst deviation " + fmt_double(worst);
  return r;
}

inline SuiteResult audit_suite() {
  SuiteResult r{"transcript-audit", true, ""};
  RunConfig rc;
  rc.n = 9;
  rc.rounds = 2;
  rc.seed = 5;
  rc.local_epochs = 2;
  rc.lr = 0.1;
  Protocol p(rc);
  p.run();
  const bool nominal = audit_transcript(p.transcript()).pass;
  Transcript leak = p.transcript();
  // a user sending its raw reduced prompt to the server
  leak.append(0, 3, kServer, kind::kPromptShare, Encoding::Plain, 64, 0);
  const bool caught = !audit_transcript(leak).pass;
  r.pass = nominal && caught;
  r.detail = std::string("nominal ") + (nominal ? "clean" : "flagged") + ", leak " + (caught ? "caught" : "missed");
  return r;
}

inline std::vector<SuiteResult> run_all() {
  const std::vector<std::pair<std::string, std::function<SuiteResult()>>> suites = {
      {"lcc-roundtrip", lcc_roundtrip},
      {"secpc-oracle", secpc_oracle},
      {"aggregate-oracle", aggregate_oracle},
      {"special-functions", special_functions},
      {"transcript-audit", audit_suite}};
  std::vector<SuiteResult> out;
  for (const auto& [name, fn] : suites) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("threw: ") + e.what()});
    }
  }
  return out;
}

}  // namespace secfpp::selftest
