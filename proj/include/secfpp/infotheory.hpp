#pragma once

// Chi-square entropies, the expected-log families g_m / h_n, the KSG
// mutual-information estimator and the leakage experiments built on them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "secfpp/error.hpp"
#include "secfpp/parallel.hpp"
#include "secfpp/rng.hpp"
#include "secfpp/special.hpp"

namespace secfpp {

using special::digamma;
using special::kEulerGamma;
using special::kLn2;

// Differential entropy (nats) of a central chi-square with d dof.
inline double chi2_entropy(double d) {
  if (!(d > 0)) throw Error(ErrorCode::DomainError, "chi-square dof must be positive");
  const double h = d / 2.0;
  return kLn2 + special::log_gamma(h) + (1.0 - h) * digamma(h) + h;
}

// sum_k Pois(k; xi) psi(a + k), which equals both families:
// g_m(xi) with a = m and h_n(xi) with a = n/2.
inline double poisson_digamma_mix(double a, double xi) {
  if (!(xi >= 0)) throw Error(ErrorCode::DomainError, "xi must be non-negative");
  if (xi == 0) return digamma(a);
  const double mode = std::floor(xi);
  const double log_pmode = -xi + mode * std::log(xi) - std::lgamma(mode + 1);
  double total = 0, weight = 0;
  // upward from the mode, then downward; each pmf from its neighbour
  double lp = log_pmode;
  for (double k = mode;; k += 1) {
    const double p = std::exp(lp);
    total += p * digamma(a + k);
    weight += p;
    if (k > mode + 10 && p < 1e-18) break;
    lp += std::log(xi) - std::log(k + 1);
  }
  lp = log_pmode;
  for (double k = mode - 1; k >= 0; k -= 1) {
    lp += std::log(k + 1) - std::log(xi);
    const double p = std::exp(lp);
    total += p * digamma(a + k);
    weight += p;
    if (p < 1e-18 && k < mode - 10) break;
  }
  return total / weight;
}

namespace detail {

// Terms larger than the result by this factor mean the closed form is
// cancelling away most of its digits.
inline constexpr double kCancellationLimit = 1e3;

}  // namespace detail

// g_m(xi) = ln xi - Ei(-xi) + sum_{j=1}^{m-1} (-1)^j [e^-xi (j-1)! - (m-1)!/(j (m-1-j)!)] xi^-j
inline double g_family(int m, double xi) {
  if (m < 1) throw Error(ErrorCode::DomainError, "g_m needs m >= 1");
  if (!(xi >= 0) || !std::isfinite(xi)) throw Error(ErrorCode::DomainError, "g_m needs xi >= 0");
  if (xi == 0) return digamma(m);
  double sum = std::log(xi) - special::exp_integral_Ei(-xi);
  double biggest = std::fabs(sum);
  const double lf_m1 = std::lgamma(static_cast<double>(m));
  for (int j = 1; j <= m - 1; ++j) {
    const double a = std::exp(-xi + std::lgamma(static_cast<double>(j)) - j * std::log(xi));
    const double b = std::exp(lf_m1 - std::log(static_cast<double>(j)) - std::lgamma(static_cast<double>(m - j)) -
                              j * std::log(xi));
    const double term = (j % 2 ? -1.0 : 1.0) * (a - b);
    biggest = std::max({biggest, a, b});
    sum += term;
  }
  if (biggest > detail::kCancellationLimit * std::max(std::fabs(sum), 1e-300)) return poisson_digamma_mix(m, xi);
  return sum;
}

// h_n(xi), n odd:
// -gamma - 2 ln 2 + 2 xi 2F2(1,1;3/2,2;-xi)
//   + sum_{j=1}^{(n-1)/2} (-1)^{j-1} Gamma(j-1/2) [sqrt(xi) e^-xi erfi(sqrt(xi)) + sum_{i=1}^{j-1} (-1)^i xi^i / Gamma(i+1/2)] xi^-j
inline double h_family(int n, double xi) {
  if (n < 1 || n % 2 == 0) throw Error(ErrorCode::DomainError, "h_n needs odd n >= 1");
  if (!(xi >= 0) || !std::isfinite(xi)) throw Error(ErrorCode::DomainError, "h_n needs xi >= 0");
  if (xi == 0) return digamma(n / 2.0);
  double head;
  try {
    head = -kEulerGamma - 2.0 * kLn2 + 2.0 * xi * special::pFq_2F2(1, 1, 1.5, 2, -xi);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::PrecisionLoss) throw;
    return poisson_digamma_mix(n / 2.0, xi);
  }
  const double rx = std::sqrt(xi);
  const double dawson_like = rx * std::exp(-xi) * special::erfi(rx);
  double sum = head, biggest = std::fabs(head);
  for (int j = 1; j <= (n - 1) / 2; ++j) {
    double inner = dawson_like;
    double inner_big = std::fabs(dawson_like);
    for (int i = 1; i <= j - 1; ++i) {
      const double t = (i % 2 ? -1.0 : 1.0) * std::exp(i * std::log(xi) - std::lgamma(i + 0.5));
      inner += t;
      inner_big = std::max(inner_big, std::fabs(t));
    }
    const double scale = std::exp(std::lgamma(j - 0.5) - j * std::log(xi));
    const double term = (j % 2 ? 1.0 : -1.0) * scale * inner;
    biggest = std::max(biggest, scale * inner_big);
    sum += term;
  }
  if (biggest > detail::kCancellationLimit * std::max(std::fabs(sum), 1e-300)) {
    return poisson_digamma_mix(n / 2.0, xi);
  }
  return sum;
}

// E[ln X] for X ~ noncentral chi-square(d, tau).
inline double expected_log_ncx2(int d, double tau) {
  if (d < 1) throw Error(ErrorCode::DomainError, "dof must be >= 1");
  return kLn2 + (d % 2 == 0 ? g_family(d / 2, tau / 2.0) : h_family(d, tau / 2.0));
}

// ln f(x) of the noncentral chi-square as a Poisson mixture of central
// densities, summed outward from the dominant term.
inline double ncx2_log_pdf(double x, int d, double tau) {
  if (!(x > 0)) return -std::numeric_limits<double>::infinity();
  const double dd = d;
  auto central = [&](double k) { return (k / 2 - 1) * std::log(x) - x / 2 - (k / 2) * kLn2 - std::lgamma(k / 2); };
  if (tau == 0) return central(dd);
  const double half = tau / 2.0;
  // term ratio a_{j+1}/a_j = half * x / ((j+1)(d+2j)); peak where it crosses 1
  const double qa = 2.0, qb = dd + 2.0, qc = dd - half * x;
  double jstar = std::floor(std::max(0.0, (-qb + std::sqrt(qb * qb - 4 * qa * qc)) / (2 * qa)));
  const double log_peak = -half + jstar * std::log(half) - std::lgamma(jstar + 1) + central(dd + 2 * jstar);
  double acc = 1.0;  // relative to the peak term
  double lr = 0;
  for (double j = jstar;; j += 1) {
    lr += std::log(half * x / ((j + 1) * (dd + 2 * j)));
    if (lr < -40) break;
    acc += std::exp(lr);
  }
  lr = 0;
  for (double j = jstar; j >= 1; j -= 1) {
    lr -= std::log(half * x / (j * (dd + 2 * (j - 1))));
    if (lr < -40) break;
    acc += std::exp(lr);
  }
  return log_peak + std::log(acc);
}

struct McEstimate {
  double mean = 0;
  double stderr_ = 0;
};

inline McEstimate summarize(const std::vector<double>& v) {
  McEstimate e;
  const double n = static_cast<double>(v.size());
  e.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0;
  for (double x : v) ss += (x - e.mean) * (x - e.mean);
  e.stderr_ = std::sqrt(ss / (n - 1) / n);
  return e;
}

inline double sample_ncx2(Rng& rng, int d, double tau) {
  const double z = rng.normal() + std::sqrt(tau);
  return (d > 1 ? rng.chi_squared(d - 1) : 0.0) + z * z;
}

// Monte-Carlo E[ln X], X ~ noncentral chi-square(d, tau).
inline McEstimate mc_expected_log_ncx2(int d, double tau, std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(samples);
  for (auto& x : v) x = std::log(sample_ncx2(rng, d, tau));
  return summarize(v);
}

// Monte-Carlo -E[ln f(X)] for the central chi-square.
inline McEstimate mc_chi2_entropy(int d, std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(samples);
  for (auto& x : v) x = -ncx2_log_pdf(rng.chi_squared(d), d, 0.0);
  return summarize(v);
}

// Differential entropy of the noncentral chi-square by Monte Carlo.
inline McEstimate mc_ncx2_entropy(int d, double tau, std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(samples);
  for (auto& x : v) x = -ncx2_log_pdf(sample_ncx2(rng, d, tau), d, tau);
  return summarize(v);
}

// ---------------------------------------------------------------- KSG

using SampleMatrix = Eigen::MatrixXd;  // one sample per row

struct KsgResult {
  double mi = 0;
  bool degenerate = false;  // every neighbourhood count hit its floor (deterministic dependence)
  bool jittered = false;
};

namespace detail {

// Row i of the max-norm distance matrix; xt holds one sample per column.
inline void maxnorm_row(const Eigen::MatrixXd& xt, Eigen::Index i, std::vector<double>& out) {
  const Eigen::Index n = xt.cols(), dim = xt.rows();
  out.resize(static_cast<std::size_t>(n));
  const double* xi = xt.col(i).data();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* xj = xt.col(j).data();
    double m = 0;
    for (Eigen::Index a = 0; a < dim; ++a) m = std::max(m, std::fabs(xi[a] - xj[a]));
    out[static_cast<std::size_t>(j)] = m;
  }
}

inline bool has_duplicates(const Eigen::MatrixXd& xt) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(xt.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    return std::lexicographical_compare(xt.col(a).data(), xt.col(a).data() + xt.rows(), xt.col(b).data(),
                                        xt.col(b).data() + xt.rows());
  };
  std::sort(order.begin(), order.end(), less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (!less(order[i - 1], order[i])) return true;
  }
  return false;
}

// Breaks exact ties at a scale far below any estimator resolution.
inline bool dejitter(Eigen::MatrixXd& xt, std::uint64_t seed) {
  if (!has_duplicates(xt)) return false;
  Rng rng(seed);
  for (Eigen::Index a = 0; a < xt.size(); ++a) xt.data()[a] += 1e-10 * rng.normal();
  return true;
}

}  // namespace detail

// KSG estimator, first variant, max-norm in the joint and marginal spaces.
// Brute force: O(N^2 (dx + dy)) time, O(N) extra memory.
inline KsgResult ksg_mi(const SampleMatrix& x, const SampleMatrix& y, int k = 3, std::uint64_t jitter_seed = 0x6a17) {
  const Eigen::Index n = x.rows();
  if (y.rows() != n) throw Error(ErrorCode::ShapeMismatch, "x and y sample counts differ");
  if (n < 100) throw Error(ErrorCode::InsufficientSamples, "KSG needs at least 100 samples, got " + std::to_string(n));
  if (k < 1 || k >= n) throw Error(ErrorCode::BadParams, "k_neighbors must lie in [1, N)");
  KsgResult r;
  Eigen::MatrixXd xt = x.transpose(), yt = y.transpose();
  r.jittered = detail::dejitter(xt, jitter_seed);
  r.jittered = detail::dejitter(yt, jitter_seed + 1) || r.jittered;

  double acc = 0;
  bool floor_everywhere = true;
  std::vector<double> dx, dy, joint(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    detail::maxnorm_row(xt, i, dx);
    detail::maxnorm_row(yt, i, dy);
    std::size_t m = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) joint[m++] = std::max(dx[static_cast<std::size_t>(j)], dy[static_cast<std::size_t>(j)]);
    }
    std::nth_element(joint.begin(), joint.begin() + (k - 1), joint.end());
    const double eps = joint[static_cast<std::size_t>(k - 1)];
    int nx = 0, ny = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      nx += dx[static_cast<std::size_t>(j)] < eps;
      ny += dy[static_cast<std::size_t>(j)] < eps;
    }
    if (nx != k - 1 || ny != k - 1) floor_everywhere = false;
    acc += digamma(nx + 1) + digamma(ny + 1);
  }
  r.mi = digamma(k) + digamma(static_cast<double>(n)) - acc / static_cast<double>(n);
  r.degenerate = floor_everywhere;
  return r;
}

// Kozachenko-Leonenko entropy with the max-norm (unit ball volume 2^d).
inline double kl_entropy(const SampleMatrix& x, int k = 3, std::uint64_t jitter_seed = 0x6a18) {
  const Eigen::Index n = x.rows();
  if (n < 100) throw Error(ErrorCode::InsufficientSamples, "entropy estimate needs at least 100 samples");
  if (k < 1 || k >= n) throw Error(ErrorCode::BadParams, "k_neighbors must lie in [1, N)");
  Eigen::MatrixXd xt = x.transpose();
  detail::dejitter(xt, jitter_seed);
  double acc = 0;
  std::vector<double> dx, row(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    detail::maxnorm_row(xt, i, dx);
    std::size_t m = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) row[m++] = dx[static_cast<std::size_t>(j)];
    }
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    acc += std::log(2.0 * row[static_cast<std::size_t>(k - 1)]);
  }
  return -digamma(k) + digamma(static_cast<double>(n)) + static_cast<double>(x.cols()) * acc / static_cast<double>(n);
}

// ------------------------------------------------------- leakage analysis

struct MiExperimentConfig {
  int d = 8;
  int n = 20;
  std::size_t sample_count = 1000;
  int k_neighbors = 3;
  double mu = 0.0;
  double sigma = 1.0;
  bool inside_cluster = true;
  std::uint64_t seed = 1;
  std::size_t outer_samples = 10000;  // Monte-Carlo draws over the conditioning prompt

  void validate() const {
    if (d < 1) throw Error(ErrorCode::BadParams, "d must be >= 1");
    if (n < 2) throw Error(ErrorCode::BadParams, "cluster size n must be >= 2");
    if (sample_count < 1000) throw Error(ErrorCode::InsufficientSamples, "sample_count must be >= 1000");
    if (k_neighbors < 1) throw Error(ErrorCode::BadParams, "k_neighbors must be >= 1");
    if (!(sigma > 0)) throw Error(ErrorCode::BadParams, "sigma must be positive");
    if (outer_samples < 2) throw Error(ErrorCode::BadParams, "outer_samples must be >= 2");
  }
};

struct LeakageBound {
  double marginal = 0;         // h(D^2) term as stated
  double stated_form = 0;       // marginal + E[ln 2 + G(d, tau/2) (+ c)]
  double stated_stderr = 0;
  double entropy_form = 0;     // h(D^2) - h(D^2 | P) with true differential entropies
  double entropy_stderr = 0;
};

// Two readings of the leakage formula. The stated form adds the expected
// log of the conditional noncentral chi-square; the entropy form replaces
// it with the noncentral differential entropy, which is what
// h(D^2) - h(D^2 | P) requires. Inputs are standardized by (mu, sigma).
inline LeakageBound leakage_bound(const MiExperimentConfig& cfg) {
  cfg.validate();
  const int d = cfg.d;
  const double n = cfg.n;
  LeakageBound r;
  const double c = cfg.inside_cluster ? 2.0 * std::log((n - 1) / n) : 0.0;
  // outside the cluster the marginal is noncentral with tau_i = d * mu^2 (standardized)
  const double mu_std = cfg.mu / cfg.sigma;
  r.marginal = cfg.inside_cluster ? chi2_entropy(d) : expected_log_ncx2(d, d * mu_std * mu_std);

  Rng rng(cfg.seed);
  std::vector<double> stated(cfg.outer_samples), ent(cfg.outer_samples);
  const double shrink = cfg.inside_cluster ? n - 1 : n;  // variance factor of the other members' mean
  for (std::size_t s = 0; s < cfg.outer_samples; ++s) {
    double tau = 0;
    for (int a = 0; a < d; ++a) {
      const double z = rng.normal();  // (p_a - mu) / sigma
      tau += z * z;
    }
    stated[s] = expected_log_ncx2(d, tau) + c;
    const double lam = shrink * tau;
    ent[s] = -ncx2_log_pdf(sample_ncx2(rng, d, lam), d, lam);
  }
  const auto p = summarize(stated);
  const auto e = summarize(ent);
  r.stated_form = r.marginal + p.mean;
  r.stated_stderr = p.stderr_;
  const double log_term = cfg.inside_cluster ? std::log(n) : std::log(n + 1);
  r.entropy_form = chi2_entropy(d) + log_term - e.mean;
  r.entropy_stderr = e.stderr_;
  return r;
}

// --------------------------------------------------------- leakage grid

struct MiRow {
  int n = 0;
  int d = 0;
  std::string quantity;
  double estimate = 0;
  double stderr_ = 0;
};

struct MiSamples {
  SampleMatrix prompt;          // P_i
  SampleMatrix center_inside;   // P_avg with P_i a member
  SampleMatrix center_outside;  // P_avg of n other prompts
  SampleMatrix distance;        // ||P_i - P_avg||^2 (inside), replicated d times
};

// The mean of m iid N(mu, sigma^2) prompts is drawn directly as
// N(mu, sigma^2 / m), which has the same law.
inline MiSamples draw_mi_samples(const MiExperimentConfig& cfg) {
  cfg.validate();
  const auto N = static_cast<Eigen::Index>(cfg.sample_count);
  const int d = cfg.d;
  const double n = cfg.n;
  Rng rng(cfg.seed);
  MiSamples s;
  s.prompt.resize(N, d);
  s.center_inside.resize(N, d);
  s.center_outside.resize(N, d);
  s.distance.resize(N, d);
  for (Eigen::Index row = 0; row < N; ++row) {
    double dist = 0;
    for (int a = 0; a < d; ++a) {
      const double p = rng.normal(cfg.mu, cfg.sigma);
      const double others = rng.normal(cfg.mu, cfg.sigma / std::sqrt(n - 1));
      const double inside = (p + (n - 1) * others) / n;
      const double outside = rng.normal(cfg.mu, cfg.sigma / std::sqrt(n));
      s.prompt(row, a) = p;
      s.center_inside(row, a) = inside;
      s.center_outside(row, a) = outside;
      dist += (p - inside) * (p - inside);
    }
    s.distance.row(row).setConstant(dist);
  }
  return s;
}

inline std::vector<MiRow> leakage_point(const MiExperimentConfig& cfg) {
  const auto s = draw_mi_samples(cfg);
  const int k = cfg.k_neighbors;
  std::vector<MiRow> rows;
  auto add = [&](const char* q, double est, double se = 0) { rows.push_back({cfg.n, cfg.d, q, est, se}); };
  const double d = cfg.d, n = cfg.n;
  add("mi_distance_ksg", ksg_mi(s.prompt, s.distance, k).mi);
  add("mi_center_inside_ksg", ksg_mi(s.prompt, s.center_inside, k).mi);
  add("mi_center_inside_analytic", 0.5 * d * std::log(n / (n - 1)));
  add("mi_center_outside_ksg", ksg_mi(s.prompt, s.center_outside, k).mi);
  add("mi_center_outside_analytic", 0.0);
  add("self_entropy_kl", kl_entropy(s.prompt, k));
  add("self_entropy_analytic", 0.5 * d * std::log(2 * special::kPi * std::exp(1.0) * cfg.sigma * cfg.sigma));
  auto th = leakage_bound(cfg);
  add("closed_form_stated", th.stated_form, th.stated_stderr);
  add("closed_form_entropy", th.entropy_form, th.entropy_stderr);
  return rows;
}

struct MiGrid {
  std::vector<int> n_values;
  std::vector<int> d_values;
  MiExperimentConfig base;
  // sweep each axis with the other held at base.n / base.d, or the full product
  bool full_product = false;
};

inline std::vector<MiRow> leakage_experiment(const MiGrid& grid, std::size_t threads = 1) {
  std::vector<std::pair<int, int>> points;
  if (grid.full_product) {
    for (int n : grid.n_values) {
      for (int d : grid.d_values) points.emplace_back(n, d);
    }
  } else {
    for (int d : grid.d_values) points.emplace_back(grid.base.n, d);
    for (int n : grid.n_values) {
      if (std::find(points.begin(), points.end(), std::pair{n, grid.base.d}) == points.end()) {
        points.emplace_back(n, grid.base.d);
      }
    }
  }
  std::vector<std::vector<MiRow>> parts(points.size());
  parallel_for(points.size(), threads, [&](std::size_t p) {
    MiExperimentConfig c = grid.base;
    c.n = points[p].first;
    c.d = points[p].second;
    c.seed = mix_seed(grid.base.seed, static_cast<std::uint64_t>(c.n) * 100003ULL + static_cast<std::uint64_t>(c.d));
    parts[p] = leakage_point(c);
  });
  std::vector<MiRow> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace secfpp
