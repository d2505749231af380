#pragma once

// Secure adaptive clustering over LCC-shared reduced prompts, and the
// cleartext oracle it must agree with.

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "secfpp/error.hpp"
#include "secfpp/field.hpp"
#include "secfpp/lcc.hpp"
#include "secfpp/parallel.hpp"
#include "secfpp/rng.hpp"
#include "secfpp/transcript.hpp"

namespace secfpp {

// Partition of users 0..n-1. Canonical form: members ascending inside a
// cluster, clusters ordered by their smallest member.
struct ClusterAssignment {
  std::vector<std::vector<std::size_t>> clusters;

  static ClusterAssignment single(std::size_t n) {
    ClusterAssignment s;
    s.clusters.emplace_back(n);
    std::iota(s.clusters[0].begin(), s.clusters[0].end(), std::size_t{0});
    return s;
  }

  std::size_t size() const { return clusters.size(); }

  void canonicalize() {
    std::erase_if(clusters, [](const auto& c) { return c.empty(); });
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  }

  void validate(std::size_t n) const {
    std::vector<char> seen(n, 0);
    for (const auto& c : clusters) {
      if (c.empty()) throw Error(ErrorCode::BadParams, "empty cluster in assignment");
      for (auto i : c) {
        if (i >= n) throw Error(ErrorCode::BadParams, "user index " + std::to_string(i) + " out of range");
        if (seen[i]++) throw Error(ErrorCode::BadParams, "user " + std::to_string(i) + " in two clusters");
      }
    }
    if (std::count(seen.begin(), seen.end(), 0) != 0) throw Error(ErrorCode::BadParams, "assignment misses users");
  }

  std::vector<std::size_t> cluster_of(std::size_t n) const {
    std::vector<std::size_t> out(n, 0);
    for (std::size_t s = 0; s < clusters.size(); ++s) {
      for (auto i : clusters[s]) out[i] = s;
    }
    return out;
  }

  friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;
};

// d(i, s) for every user i and cluster s of the assignment it was built on.
struct DistanceTable {
  Eigen::MatrixXd d;
  std::vector<std::size_t> sizes;
};

// Symmetric, zero diagonal: squared gap between cluster centroids.
using GapTable = Eigen::MatrixXd;

struct AdaptiveConfig {
  std::optional<double> theta_spawn;  // nullopt: auto
  std::optional<double> theta_merge;  // nullopt: auto
  double auto_factor_spawn = 4.0;
  double auto_factor_merge = 0.5;
  bool merge = true;

  void validate() const {
    if (theta_spawn && !(*theta_spawn > 0)) throw Error(ErrorCode::BadConfig, "theta_spawn must be positive");
    if (theta_merge && !(*theta_merge > 0)) throw Error(ErrorCode::BadConfig, "theta_merge must be positive");
    if (!(auto_factor_spawn > 0) || !(auto_factor_merge > 0)) {
      throw Error(ErrorCode::BadConfig, "auto threshold factors must be positive");
    }
  }
};

// One reassign / spawn / merge pass.
inline ClusterAssignment adaptive_update(const DistanceTable& dist, const GapTable& gaps, const ClusterAssignment& s,
                                         const AdaptiveConfig& cfg) {
  const auto n = static_cast<std::size_t>(dist.d.rows());
  const auto k = static_cast<std::size_t>(dist.d.cols());
  if (k != s.size() || static_cast<std::size_t>(gaps.rows()) != k) {
    throw Error(ErrorCode::ShapeMismatch, "distance/gap tables do not match the assignment");
  }

  std::vector<std::size_t> nearest(n);
  std::vector<double> best(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t arg = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (dist.d(i, c) < dist.d(i, arg)) arg = c;
    }
    nearest[i] = arg;
    best[i] = dist.d(i, arg);
    total += best[i];
  }
  const double mean = n ? total / static_cast<double>(n) : 0.0;
  const double theta_spawn = cfg.theta_spawn.value_or(cfg.auto_factor_spawn * mean);
  const double theta_merge = cfg.theta_merge.value_or(cfg.auto_factor_merge * mean);

  std::vector<std::vector<std::size_t>> kept(k);
  std::vector<std::vector<std::size_t>> spawned;
  for (std::size_t i = 0; i < n; ++i) {
    if (best[i] > theta_spawn) {
      spawned.push_back({i});
    } else {
      kept[nearest[i]].push_back(i);
    }
  }

  // union-find over surviving old clusters; fresh singletons sit out
  std::vector<std::size_t> parent(k);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  if (cfg.merge) {
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        if (kept[a].empty() || kept[b].empty() || !(gaps(a, b) < theta_merge)) continue;
        const auto ra = find(a), rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  ClusterAssignment out;
  std::vector<std::vector<std::size_t>> merged(k);
  for (std::size_t c = 0; c < k; ++c) {
    auto& dst = merged[find(c)];
    dst.insert(dst.end(), kept[c].begin(), kept[c].end());
  }
  for (auto& c : merged) {
    if (!c.empty()) out.clusters.push_back(std::move(c));
  }
  for (auto& c : spawned) out.clusters.push_back(std::move(c));
  out.canonicalize();
  return out;
}

struct SecpcResult {
  ClusterAssignment next;
  DistanceTable distances;
  GapTable gaps;
};

// Cleartext reference: identical quantities in real arithmetic.
inline DistanceTable plaintext_distances(const std::vector<Eigen::VectorXd>& p, const ClusterAssignment& s) {
  DistanceTable out;
  out.d.resize(static_cast<Eigen::Index>(p.size()), static_cast<Eigen::Index>(s.size()));
  for (std::size_t c = 0; c < s.size(); ++c) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(p.front().size());
    for (auto i : s.clusters[c]) mu += p[i];
    mu /= static_cast<double>(s.clusters[c].size());
    out.sizes.push_back(s.clusters[c].size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      out.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = (p[i] - mu).squaredNorm();
    }
  }
  return out;
}

inline GapTable plaintext_gaps(const std::vector<Eigen::VectorXd>& p, const ClusterAssignment& s) {
  const auto k = static_cast<Eigen::Index>(s.size());
  std::vector<Eigen::VectorXd> mu;
  for (const auto& c : s.clusters) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(p.front().size());
    for (auto i : c) m += p[i];
    mu.push_back(m / static_cast<double>(c.size()));
  }
  GapTable g = GapTable::Zero(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) g(a, b) = g(b, a) = (mu[a] - mu[b]).squaredNorm();
  }
  return g;
}

inline SecpcResult plaintext_oracle(const std::vector<Eigen::VectorXd>& p, const ClusterAssignment& s,
                                    const AdaptiveConfig& cfg) {
  SecpcResult r;
  r.distances = plaintext_distances(p, s);
  r.gaps = plaintext_gaps(p, s);
  r.next = adaptive_update(r.distances, r.gaps, s, cfg);
  return r;
}

// held[j][i]: holder j's share of user i's sliced, quantized reduced prompt.
using HeldShares = std::vector<std::vector<FieldVector>>;

struct SecpcContext {
  const LccCode* code = nullptr;
  QuantConfig quant;
  Transcript* transcript = nullptr;
  std::size_t round = 0;
  std::vector<char> responding;  // empty: every holder answers
  bool robust = false;
  std::size_t threads = 1;
  PhaseTimes* times = nullptr;

  bool answers(std::size_t j) const { return responding.empty() || responding[j]; }
};

// Phase 1: each user quantizes, slices and shares its reduced prompt.
// rng_for(i) supplies user i's private randomness.
template <class RngFor>
HeldShares share_prompts(const std::vector<Eigen::VectorXd>& reduced, const SecpcContext& ctx, RngFor&& rng_for) {
  const auto& code = *ctx.code;
  const std::size_t n = code.params().n;
  if (reduced.size() != n) throw Error(ErrorCode::ShapeMismatch, "one reduced prompt per holder expected");
  Stopwatch sw;
  std::vector<std::vector<ShareBundle>> by_owner(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    const Eigen::VectorXd& v = reduced[i];
    auto q = quantize(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), ctx.quant, code.field());
    auto slices = slice_vector(q, code.params().ell);
    Rng rng = rng_for(i);
    by_owner[i] = code.share(slices, rng);
  });
  HeldShares held(n, std::vector<FieldVector>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) held[j][i] = std::move(by_owner[i][j].values);
  }
  if (ctx.times) ctx.times->share += sw.seconds();
  if (ctx.transcript) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) {
          ctx.transcript->append(ctx.round, static_cast<long>(i), static_cast<long>(j), kind::kPromptShare,
                                 Encoding::Share, held[j][i]);
        }
      }
    }
  }
  return held;
}

namespace detail {

inline std::vector<FieldVector> coded_centers(const PrimeField& f, const std::vector<FieldVector>& mine,
                                              const ClusterAssignment& s) {
  std::vector<FieldVector> mu;
  for (const auto& c : s.clusters) {
    FieldVector m(mine.front().size());
    for (auto i : c) {
      for (std::size_t x = 0; x < m.size(); ++x) m[x] = f.add(m[x], mine[i][x]);
    }
    mu.push_back(std::move(m));
  }
  return mu;
}

inline FieldElement sq_norm_diff(const PrimeField& f, const FieldVector& a, FieldElement ca, const FieldVector& b,
                                 FieldElement cb) {
  FieldElement acc{0};
  for (std::size_t x = 0; x < a.size(); ++x) {
    const FieldElement diff = f.sub(f.mul(ca, a[x]), f.mul(cb, b[x]));
    acc = f.add(acc, f.mul(diff, diff));
  }
  return acc;
}

// Decodes a batch of degree-d coded values and folds the l slice outputs.
inline FieldVector decode_sum(const LccCode& code, const std::vector<ShareBundle>& bundles, std::size_t degree,
                              bool robust) {
  std::vector<FieldVector> outs =
      robust ? code.recon_robust(bundles, degree).secrets : code.recon(bundles, degree);
  FieldVector sum(outs.front().size());
  for (const auto& o : outs) {
    for (std::size_t x = 0; x < sum.size(); ++x) sum[x] = code.field().add(sum[x], o[x]);
  }
  return sum;
}

// Squared distances are non-negative; anything in the upper half of the
// field means the integer value wrapped.
inline double decode_square(FieldElement v, const QuantConfig& quant, const PrimeField& f, double divisor) {
  const double half = static_cast<double>((f.modulus() + 1) / 2);
  const double x = dequantize(v, quant, f, 2, half);
  if (x < 0) {
    throw Error(ErrorCode::OverflowDetected, "decoded squared distance is negative; modulus too small for the data");
  }
  return x / divisor;
}

}  // namespace detail

// Phase 2 for holder j: coded distance of every user to every coded center,
// laid out as [cluster][user].
inline FieldVector holder_distances(const PrimeField& f, const std::vector<FieldVector>& mine,
                                    const ClusterAssignment& s) {
  const auto mu = detail::coded_centers(f, mine, s);
  FieldVector out;
  out.reserve(s.size() * mine.size());
  for (std::size_t c = 0; c < s.size(); ++c) {
    const FieldElement sz = f.element(s.clusters[c].size());
    for (std::size_t i = 0; i < mine.size(); ++i) out.push_back(detail::sq_norm_diff(f, mu[c], FieldElement{1}, mine[i], sz));
  }
  return out;
}

// Coded ||s'| mu_s - |s| mu_s'||^2 for every pair a < b, row-major.
inline FieldVector holder_gaps(const PrimeField& f, const std::vector<FieldVector>& mine, const ClusterAssignment& s) {
  const auto mu = detail::coded_centers(f, mine, s);
  FieldVector out;
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t b = a + 1; b < s.size(); ++b) {
      out.push_back(detail::sq_norm_diff(f, mu[a], f.element(s.clusters[b].size()), mu[b],
                                         f.element(s.clusters[a].size())));
    }
  }
  return out;
}

namespace detail {

// Collects per-holder coded vectors from responding holders, logs the
// upload and the reconstruction, and returns the folded decode.
template <class PerHolder>
FieldVector gather_and_decode(const SecpcContext& ctx, const char* msg_kind, const char* purpose,
                              PerHolder&& per_holder) {
  const auto& code = *ctx.code;
  const std::size_t n = code.params().n;
  std::vector<FieldVector> coded(n);
  Stopwatch sw;
  parallel_for(n, ctx.threads, [&](std::size_t j) {
    if (ctx.answers(j)) coded[j] = per_holder(j);
  });
  if (ctx.times) ctx.times->distance += sw.seconds();

  std::vector<ShareBundle> bundles;
  for (std::size_t j = 0; j < n; ++j) {
    if (!ctx.answers(j)) continue;
    if (ctx.transcript) {
      ctx.transcript->append(ctx.round, static_cast<long>(j), kServer, msg_kind, Encoding::CodedResult, coded[j]);
    }
    bundles.push_back({j, std::move(coded[j])});
  }
  const std::size_t degree = 2 * code.params().code_degree();
  Stopwatch dec;
  auto sum = decode_sum(code, bundles, degree, ctx.robust);
  if (ctx.times) ctx.times->decode += dec.seconds();
  if (ctx.transcript) ctx.transcript->add_recon({ctx.round, purpose, degree, bundles.size()});
  return sum;
}

}  // namespace detail

inline DistanceTable secure_distances(const HeldShares& held, const ClusterAssignment& s, const SecpcContext& ctx) {
  const auto& f = ctx.code->field();
  const std::size_t n = ctx.code->params().n;
  auto sum = detail::gather_and_decode(ctx, kind::kDistanceShare, "distance",
                                       [&](std::size_t j) { return holder_distances(f, held[j], s); });
  DistanceTable out;
  out.d.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.size()));
  for (std::size_t c = 0; c < s.size(); ++c) {
    const double sz = static_cast<double>(s.clusters[c].size());
    out.sizes.push_back(s.clusters[c].size());
    for (std::size_t i = 0; i < n; ++i) {
      out.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          detail::decode_square(sum[c * n + i], ctx.quant, f, sz * sz);
    }
  }
  return out;
}

inline GapTable secure_gaps(const HeldShares& held, const ClusterAssignment& s, const SecpcContext& ctx) {
  const auto k = static_cast<Eigen::Index>(s.size());
  GapTable g = GapTable::Zero(k, k);
  if (k < 2) return g;
  const auto& f = ctx.code->field();
  auto sum = detail::gather_and_decode(ctx, kind::kCenterGapShare, "center-gap",
                                       [&](std::size_t j) { return holder_gaps(f, held[j], s); });
  std::size_t idx = 0;
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) {
      const double div = static_cast<double>(s.clusters[a].size() * s.clusters[b].size());
      g(a, b) = g(b, a) = detail::decode_square(sum[idx++], ctx.quant, f, div * div);
    }
  }
  return g;
}

// Gap between two clusters of S, computed through the coded pipeline.
inline double coded_center_gap(const ClusterAssignment& s, const HeldShares& held, std::size_t a, std::size_t b,
                               const SecpcContext& ctx) {
  if (a == b) throw Error(ErrorCode::BadParams, "center gap needs two distinct clusters");
  ClusterAssignment pair;
  pair.clusters = {s.clusters.at(a), s.clusters.at(b)};
  return secure_gaps(held, pair, ctx)(0, 1);
}

// Phases 2 and 3 of one round. Gaps are computed only when merging is on.
inline SecpcResult secpc_round(const HeldShares& held, const ClusterAssignment& s, const AdaptiveConfig& cfg,
                               const SecpcContext& ctx) {
  s.validate(ctx.code->params().n);
  SecpcResult r;
  r.distances = secure_distances(held, s, ctx);
  r.gaps = cfg.merge ? secure_gaps(held, s, ctx)
                     : GapTable::Zero(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(s.size()));
  Stopwatch sw;
  r.next = adaptive_update(r.distances, r.gaps, s, cfg);
  if (ctx.times) ctx.times->server_cluster += sw.seconds();
  return r;
}

}  // namespace secfpp
