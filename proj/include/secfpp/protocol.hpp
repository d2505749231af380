#pragma once

// Round loop of clustered federated prompt personalization with a
// synthetic quadratic objective standing in for the model loss.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "secfpp/cluster.hpp"
#include "secfpp/error.hpp"
#include "secfpp/field.hpp"
#include "secfpp/lcc.hpp"
#include "secfpp/parallel.hpp"
#include "secfpp/reduce.hpp"
#include "secfpp/rng.hpp"
#include "secfpp/transcript.hpp"

namespace secfpp {

struct TaskConfig {
  std::size_t domains = 2;
  double domain_scale = 1.0;
  double local_sigma = 0.03;  // per-user persistent offset L*_i
  double noise_sigma = 0.03;  // extra target noise
  double init_scale = 0.01;   // spread of the initial global prompt
};

enum class BasisMode { SharedRandom, SvdGlobal };

struct RunConfig {
  std::size_t n = 20;
  std::size_t rounds = 100;
  double lr = 0.001;
  std::size_t local_epochs = 10;
  std::size_t k_tokens = 4;
  std::size_t d_embed = 8;
  std::size_t r_reduced = 8;
  u64 lambda = kDefaultLambda;
  double alpha = 1.0 / 3.0;
  u64 seed = 0;
  AdaptiveConfig adaptive;
  TaskConfig task;
  // every quantized entry (reduced coordinate or gradient) must stay below this
  double value_bound = 16.0;
  std::optional<u64> modulus;
  std::optional<std::size_t> ell;
  bool linear_ell = false;
  BasisMode basis = BasisMode::SharedRandom;
  double dropout = 0.0;
  bool clustering = true;
  bool secure = true;
  bool robust = false;
  std::size_t threads = 1;

  std::size_t d_total() const { return k_tokens * d_embed; }
  std::size_t t() const { return privacy_threshold(n, alpha); }
  std::size_t resolved_ell() const {
    if (ell) return *ell;
    return linear_ell ? linear_ell_value() : default_ell(n, t());
  }
  std::size_t linear_ell_value() const { return std::max<std::size_t>(1, secfpp::linear_ell(n, t())); }
  int degree_cap() const { return clustering ? 2 : 1; }

  // Upper bound on every squared quantity the server decodes, in real
  // units: user-to-center distances and pairwise center gaps.
  double max_sq_distance() const {
    const double nb = static_cast<double>(n) * value_bound;
    const double dist = static_cast<double>(r_reduced) * (2.0 * nb) * (2.0 * nb);
    const double gap = static_cast<double>(r_reduced) * std::pow(static_cast<double>(n) * nb / 2.0, 2);
    return clustering ? std::max(dist, gap) : 0.0;
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::BadConfig, m); };
    if (n < 2) bad("n must be at least 2 (a single user has no federation)");
    if (rounds < 1) bad("rounds must be >= 1");
    if (!(lr >= 0) || !std::isfinite(lr)) bad("lr must be a finite non-negative number");
    if (k_tokens < 1 || d_embed < 1) bad("k_tokens and d_embed must be >= 1");
    if (r_reduced < 1 || r_reduced > d_total()) bad("r_reduced must lie in [1, k_tokens*d_embed]");
    if (basis == BasisMode::SvdGlobal && r_reduced > d_total()) bad("r_reduced exceeds the SVD basis size");
    if (lambda < 1) bad("lambda must be >= 1");
    if (!(alpha > 0) || !(alpha < 1)) bad("alpha must lie in (0, 1)");
    if (t() < 1) bad("alpha*n must be >= 1 (privacy threshold t = floor(alpha*n) is 0)");
    if (!(value_bound > 0)) bad("value_bound must be positive");
    if (!(dropout >= 0) || !(dropout < 1)) bad("dropout must lie in [0, 1)");
    if (task.domains < 1 || task.domains > n) bad("task.domains must lie in [1, n]");
    if (!(task.local_sigma >= 0) || !(task.noise_sigma >= 0) || !(task.init_scale >= 0)) {
      bad("task noise scales must be non-negative");
    }
    if (ell && *ell < 1) bad("ell must be >= 1");
    if (ell && linear_ell) bad("ell and linear_ell are mutually exclusive");
    if (threads < 1) bad("threads must be >= 1");
    adaptive.validate();
    const std::size_t l = resolved_ell();
    const std::size_t need = static_cast<std::size_t>(degree_cap()) * (l + t() - 1) + 1;
    if (need > n) {
      bad("degree-" + std::to_string(degree_cap()) + " decoding needs " + std::to_string(degree_cap()) +
          "*(ell+t-1)+1 <= n, but ell=" + std::to_string(l) + ", t=" + std::to_string(t()) + " give " +
          std::to_string(need) + " > n=" + std::to_string(n));
    }
    const u64 floor_q = min_modulus(lambda, max_sq_distance());
    if (floor_q >= kMaxModulus) bad("value_bound too large: required modulus exceeds 2^62");
    if (modulus) {
      if (!is_prime(*modulus) || *modulus >= kMaxModulus) bad("modulus must be a prime below 2^62");
      if (*modulus < floor_q) bad("modulus below 2*lambda^2*D = " + std::to_string(floor_q));
      if (2.0 * static_cast<double>(lambda) * value_bound >= static_cast<double>(*modulus)) {
        bad("2*eta must be below the modulus");
      }
    }
  }

  PrimeField make_field() const {
    if (modulus) return PrimeField(*modulus);
    try {
      return default_field(lambda, max_sq_distance());
    } catch (const Error& e) {
      throw Error(ErrorCode::BadConfig, e.what());
    }
  }
};

struct SyntheticTask {
  std::vector<std::size_t> domain_of;
  std::vector<PromptMatrix> domain_prompt;  // G* per domain
  std::vector<PromptMatrix> targets;        // T_i
};

// Domains are contiguous user blocks. Domain 0 targets +scale, domain 1
// -scale; further domains get seeded +-scale patterns.
inline SyntheticTask make_task(const RunConfig& cfg) {
  SyntheticTask task;
  const auto k = static_cast<Eigen::Index>(cfg.k_tokens), d = static_cast<Eigen::Index>(cfg.d_embed);
  Rng rng(mix_seed(cfg.seed, 1));
  for (std::size_t dom = 0; dom < cfg.task.domains; ++dom) {
    PromptMatrix g(k, d);
    if (dom < 2) {
      g.setConstant(dom == 0 ? cfg.task.domain_scale : -cfg.task.domain_scale);
    } else {
      for (Eigen::Index a = 0; a < g.size(); ++a) {
        g.data()[a] = (rng.next_u64() & 1U) ? cfg.task.domain_scale : -cfg.task.domain_scale;
      }
    }
    task.domain_prompt.push_back(std::move(g));
  }
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const std::size_t dom = i * cfg.task.domains / cfg.n;
    task.domain_of.push_back(dom);
    PromptMatrix t = task.domain_prompt[dom];
    for (Eigen::Index a = 0; a < t.size(); ++a) {
      t.data()[a] += cfg.task.local_sigma * rng.normal() + cfg.task.noise_sigma * rng.normal();
    }
    task.targets.push_back(std::move(t));
  }
  return task;
}

struct PromptState {
  std::vector<PromptMatrix> global;        // indexed by cluster position in S
  std::vector<PromptMatrix> local;         // per user
  std::vector<PromptMatrix> personalized;  // P_G,s(i) + P_L,i

  void recompose(const ClusterAssignment& s) {
    const auto owner = s.cluster_of(local.size());
    personalized.resize(local.size());
    for (std::size_t i = 0; i < local.size(); ++i) personalized[i] = global[owner[i]] + local[i];
  }
};

struct InitResult {
  PromptState state;
  ClusterAssignment assignment;
};

inline InitResult init(const RunConfig& cfg) {
  cfg.validate();
  InitResult r;
  r.assignment = ClusterAssignment::single(cfg.n);
  Rng rng(mix_seed(cfg.seed, 2));
  PromptMatrix g(static_cast<Eigen::Index>(cfg.k_tokens), static_cast<Eigen::Index>(cfg.d_embed));
  for (Eigen::Index a = 0; a < g.size(); ++a) g.data()[a] = cfg.task.init_scale * rng.normal();
  r.state.global = {g};
  r.state.local.assign(cfg.n, PromptMatrix::Zero(g.rows(), g.cols()));
  r.state.recompose(r.assignment);
  return r;
}

inline double user_loss(const PromptMatrix& p, const PromptMatrix& target) { return 0.5 * (p - target).squaredNorm(); }

struct LocalStepResult {
  PromptMatrix local;
  PromptMatrix grad_global;
};

// `epochs` descent steps on the local component with the global frozen.
// The returned global gradient is the one evaluated in the last epoch
// (before that epoch's update); with zero epochs it is the current one.
inline LocalStepResult local_step(const PromptMatrix& global, const PromptMatrix& local, const PromptMatrix& target,
                                  double lr, std::size_t epochs) {
  LocalStepResult r{local, global + local - target};
  for (std::size_t e = 0; e < epochs; ++e) {
    r.grad_global = global + r.local - target;
    r.local -= lr * r.grad_global;
  }
  return r;
}

struct AggregateContext {
  const LccCode* code = nullptr;
  QuantConfig quant;
  double value_bound = 0;
  Transcript* transcript = nullptr;
  std::size_t round = 0;
  std::vector<char> responding;
  bool robust = false;
  std::size_t threads = 1;
  PhaseTimes* times = nullptr;

  bool answers(std::size_t j) const { return responding.empty() || responding[j]; }
};

// Cluster means of user gradients. Users share their quantized gradients,
// holders add shares per cluster, and the server decodes only the sums.
template <class RngFor>
std::vector<Eigen::VectorXd> secure_aggregate(const std::vector<Eigen::VectorXd>& grads, const ClusterAssignment& s,
                                              const AggregateContext& ctx, RngFor&& rng_for) {
  const auto& code = *ctx.code;
  const auto& f = code.field();
  const std::size_t n = code.params().n, ell = code.params().ell;
  if (grads.size() != n) throw Error(ErrorCode::ShapeMismatch, "one gradient per user expected");
  const auto dim = static_cast<std::size_t>(grads.front().size());
  const std::size_t width = (dim + ell - 1) / ell;
  Stopwatch sw;

  std::vector<std::vector<ShareBundle>> by_owner(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    auto q = quantize(std::span<const double>(grads[i].data(), dim), ctx.quant, f);
    Rng rng = rng_for(i);
    by_owner[i] = code.share(slice_vector(q, ell), rng);
  });
  if (ctx.transcript) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) {
          ctx.transcript->append(ctx.round, static_cast<long>(i), static_cast<long>(j), kind::kGradientShare,
                                 Encoding::Share, by_owner[i][j].values);
        }
      }
    }
  }

  // holder j: [sum_{i in s} g_i]_j for every cluster, concatenated
  std::vector<FieldVector> coded(n);
  parallel_for(n, ctx.threads, [&](std::size_t j) {
    if (!ctx.answers(j)) return;
    FieldVector out(s.size() * width);
    for (std::size_t c = 0; c < s.size(); ++c) {
      for (auto i : s.clusters[c]) {
        const auto& v = by_owner[i][j].values;
        for (std::size_t x = 0; x < width; ++x) out[c * width + x] = f.add(out[c * width + x], v[x]);
      }
    }
    coded[j] = std::move(out);
  });
  std::vector<ShareBundle> bundles;
  for (std::size_t j = 0; j < n; ++j) {
    if (!ctx.answers(j)) continue;
    if (ctx.transcript) {
      ctx.transcript->append(ctx.round, static_cast<long>(j), kServer, kind::kAggregateShare, Encoding::CodedResult,
                             coded[j]);
    }
    bundles.push_back({j, std::move(coded[j])});
  }
  const std::size_t degree = code.params().code_degree();
  auto slices = ctx.robust ? code.recon_robust(bundles, degree).secrets : code.recon(bundles, degree);
  if (ctx.transcript) ctx.transcript->add_recon({ctx.round, "aggregate", degree, bundles.size()});

  const double half = static_cast<double>((f.modulus() + 1) / 2);
  std::vector<Eigen::VectorXd> means;
  for (std::size_t c = 0; c < s.size(); ++c) {
    std::vector<FieldVector> parts;
    for (const auto& sl : slices) {
      parts.emplace_back(sl.begin() + static_cast<long>(c * width), sl.begin() + static_cast<long>((c + 1) * width));
    }
    auto flat = unslice(parts, dim);
    const double sz = static_cast<double>(s.clusters[c].size());
    Eigen::VectorXd m(static_cast<Eigen::Index>(dim));
    for (std::size_t x = 0; x < dim; ++x) {
      m(static_cast<Eigen::Index>(x)) = dequantize(flat[x], ctx.quant, f, 1, half) / sz;
      if (std::fabs(m(static_cast<Eigen::Index>(x))) > ctx.value_bound) {
        throw Error(ErrorCode::OverflowDetected, "aggregate of cluster " + std::to_string(c) +
                                                     " decodes outside the value bound");
      }
    }
    means.push_back(std::move(m));
  }
  if (ctx.times) ctx.times->aggregate += sw.seconds();
  return means;
}

struct RoundMetrics {
  std::size_t round = 0;
  std::vector<double> loss;
  double mean_loss = 0;
  ClusterAssignment assignment;
  std::vector<std::size_t> responding;
  PhaseTimes times;
};

class Protocol {
 public:
  explicit Protocol(RunConfig cfg)
      : cfg_(std::move(cfg)),
        field_((cfg_.validate(), cfg_.make_field())),
        code_(field_, LccParams::make(field_, cfg_.n, cfg_.t(), cfg_.resolved_ell(), cfg_.degree_cap())),
        quant_(QuantConfig::for_bound(cfg_.lambda, cfg_.value_bound)),
        task_(make_task(cfg_)) {
    quant_.validate(field_);
    auto start = init(cfg_);
    state_ = std::move(start.state);
    assignment_ = std::move(start.assignment);
    const auto d_total = static_cast<Eigen::Index>(cfg_.d_total()), r = static_cast<Eigen::Index>(cfg_.r_reduced);
    basis_ = cfg_.basis == BasisMode::SvdGlobal ? basis_from_svd(state_.global[0], r)
                                               : make_shared_basis(mix_seed(cfg_.seed, 3), d_total, r);
    transcript_.set_policy({cfg_.n, code_.params().ell, code_.params().t});
  }

  const RunConfig& config() const { return cfg_; }
  const PrimeField& field() const { return field_; }
  const LccCode& code() const { return code_; }
  const QuantConfig& quant() const { return quant_; }
  const SyntheticTask& task() const { return task_; }
  const SharedBasis& basis() const { return basis_; }
  const PromptState& state() const { return state_; }
  const ClusterAssignment& assignment() const { return assignment_; }
  Transcript& transcript() { return transcript_; }
  const Transcript& transcript() const { return transcript_; }
  std::size_t rounds_done() const { return round_; }

  std::vector<double> losses() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < cfg_.n; ++i) out.push_back(user_loss(state_.personalized[i], task_.targets[i]));
    return out;
  }
  double mean_loss() const {
    auto l = losses();
    return std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
  }

  RoundMetrics run_round() {
    const std::size_t round = round_++;
    const std::size_t n = cfg_.n;
    RoundMetrics m;
    m.round = round;
    auto seed_for = [&](std::uint64_t purpose, std::size_t user) {
      return mix_seed(mix_seed(mix_seed(cfg_.seed, 100 + purpose), round), user);
    };

    // local training against the current (stale) global component
    const auto owner = assignment_.cluster_of(n);
    std::vector<Eigen::VectorXd> grads(n);
    parallel_for(n, cfg_.threads, [&](std::size_t i) {
      auto r = local_step(state_.global[owner[i]], state_.local[i], task_.targets[i], cfg_.lr, cfg_.local_epochs);
      state_.local[i] = std::move(r.local);
      grads[i] = flatten(r.grad_global);
    });
    state_.recompose(assignment_);

    std::vector<char> responding(n, 1);
    if (cfg_.dropout > 0) {
      Rng drop(seed_for(0, 0));
      for (std::size_t j = 0; j < n; ++j) responding[j] = drop.uniform01() >= cfg_.dropout;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (responding[j]) m.responding.push_back(j);
    }

    ClusterAssignment next = assignment_;
    if (cfg_.clustering) {
      std::vector<Eigen::VectorXd> reduced(n);
      for (std::size_t i = 0; i < n; ++i) reduced[i] = reduce_prompt(state_.personalized[i], basis_).coords;
      if (cfg_.secure) {
        SecpcContext ctx{&code_, quant_, &transcript_, round, responding, cfg_.robust, cfg_.threads, &m.times};
        auto held = share_prompts(reduced, ctx, [&](std::size_t i) { return Rng(seed_for(1, i)); });
        next = secpc_round(held, assignment_, cfg_.adaptive, ctx).next;
      } else {
        Stopwatch sw;
        next = plaintext_oracle(reduced, assignment_, cfg_.adaptive).next;
        m.times.server_cluster += sw.seconds();
      }
      if (cfg_.secure) {
        for (std::size_t i = 0; i < n; ++i) {
          transcript_.append(round, kServer, static_cast<long>(i), kind::kAssignmentBroadcast, Encoding::Plain,
                             sizeof(u64) * n, assignment_digest(next));
          transcript_.append(round, static_cast<long>(i), kServer, kind::kAssignmentAck, Encoding::Plain, sizeof(u64),
                             assignment_digest(next));
        }
      }
    }

    // a cluster's global component starts as the mean of its members' previous ones
    std::vector<PromptMatrix> globals;
    for (const auto& c : next.clusters) {
      const bool intact = std::all_of(c.begin(), c.end(), [&](std::size_t i) { return owner[i] == owner[c.front()]; });
      if (intact) {
        globals.push_back(state_.global[owner[c.front()]]);
        continue;
      }
      PromptMatrix g = PromptMatrix::Zero(state_.global[0].rows(), state_.global[0].cols());
      for (auto i : c) g += state_.global[owner[i]];
      globals.push_back(g / static_cast<double>(c.size()));
    }

    std::vector<Eigen::VectorXd> means;
    if (cfg_.secure) {
      AggregateContext actx{&code_, quant_, cfg_.value_bound, &transcript_, round, responding, cfg_.robust,
                            cfg_.threads, &m.times};
      means = secure_aggregate(grads, next, actx, [&](std::size_t i) { return Rng(seed_for(2, i)); });
      for (std::size_t c = 0; c < next.size(); ++c) {
        std::span<const double> payload(means[c].data(), static_cast<std::size_t>(means[c].size()));
        for (auto i : next.clusters[c]) {
          transcript_.append(round, kServer, static_cast<long>(i), kind::kAggregateBroadcast, Encoding::Plain,
                             payload.size() * sizeof(double), fnv1a(payload));
        }
      }
    } else {
      Stopwatch sw;
      for (const auto& c : next.clusters) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(grads[0].size());
        for (auto i : c) g += grads[i];
        means.push_back(g / static_cast<double>(c.size()));
      }
      m.times.aggregate += sw.seconds();
    }
    for (std::size_t c = 0; c < next.size(); ++c) {
      globals[c] -= cfg_.lr * unflatten(means[c], globals[c].rows(), globals[c].cols());
    }

    state_.global = std::move(globals);
    assignment_ = std::move(next);
    state_.recompose(assignment_);
    m.assignment = assignment_;
    m.loss = losses();
    m.mean_loss = std::accumulate(m.loss.begin(), m.loss.end(), 0.0) / static_cast<double>(n);
    return m;
  }

  std::vector<RoundMetrics> run() {
    std::vector<RoundMetrics> out;
    for (std::size_t r = 0; r < cfg_.rounds; ++r) out.push_back(run_round());
    return out;
  }

 private:
  static std::uint64_t assignment_digest(const ClusterAssignment& s) {
    FieldVector flat;
    for (std::size_t c = 0; c < s.size(); ++c) {
      for (auto i : s.clusters[c]) flat.push_back({c * 1000003ULL + i});
    }
    return fnv1a(flat);
  }

  RunConfig cfg_;
  PrimeField field_;
  LccCode code_;
  QuantConfig quant_;
  SyntheticTask task_;
  SharedBasis basis_;
  PromptState state_;
  ClusterAssignment assignment_;
  Transcript transcript_;
  std::size_t round_ = 0;
};

}  // namespace secfpp
