#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "secfpp/secfpp.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using namespace secfpp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSelftest = 1;
constexpr int kExitConfig = 2;
constexpr int kExitProtocol = 3;
constexpr int kExitAudit = 4;

struct Globals {
  std::string config_path;
  std::optional<u64> seed;
  std::string out_dir;
  std::optional<std::size_t> threads;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadConfig, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AppConfig load(const Globals& g) {
  const std::string text = g.config_path.empty() ? std::string("{}") : slurp(g.config_path);
  AppConfig app = parse_config(text, g.seed);
  if (g.threads) {
    if (*g.threads < 1) throw Error(ErrorCode::BadConfig, "--threads must be >= 1");
    app.run.threads = *g.threads;
    app.bench.threads = *g.threads;
  }
  return app;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::BadConfig, "cannot write " + p.string());
  out << body;
}

int cmd_run(const Globals& g) {
  AppConfig app;
  try {
    app = load(g);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const fs::path dir = fs::path(g.out_dir.empty() ? "out" : g.out_dir) / run_id(app.run);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "cannot create " << dir << ": " << ec.message() << '\n';
    return kExitConfig;
  }

  std::ostringstream metrics, summary;
  write_summary_header(summary);
  AuditReport rep;
  try {
    Protocol proto(app.run);
    for (std::size_t r = 0; r < app.run.rounds; ++r) {
      const RoundMetrics m = proto.run_round();
      metrics << to_json(m).dump() << '\n';
      write_summary_row(summary, m);
    }
    std::ostringstream tr;
    write_transcript(tr, proto.transcript());
    write_file(dir / "transcript.jsonl", tr.str());
    rep = audit_transcript(proto.transcript());
    std::cout << "run " << dir.filename().string() << ": " << proto.assignment().size() << " clusters, mean loss "
              << fmt_double(proto.mean_loss()) << ", " << proto.transcript().records().size() << " messages\n";
  } catch (const Error& e) {
    write_file(dir / "metrics.jsonl", metrics.str());
    write_file(dir / "summary.csv", summary.str());
    std::cerr << "protocol failure: " << e.what() << '\n';
    return e.code() == ErrorCode::BadConfig ? kExitConfig : kExitProtocol;
  }
  write_file(dir / "metrics.jsonl", metrics.str());
  write_file(dir / "summary.csv", summary.str());
  write_file(dir / "audit.json", to_json(rep).dump(2) + "\n");
  std::cout << "audit: " << (rep.pass ? "pass" : "FAIL") << " (" << rep.records_checked << " records, "
            << rep.recons_checked << " reconstructions)\n";
  for (const auto& v : rep.violations) std::cerr << "  " << v << '\n';
  return rep.pass ? kExitOk : kExitAudit;
}

int cmd_mi(const Globals& g) {
  AppConfig app;
  try {
    app = load(g);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const auto rows = leakage_experiment(app.mi, app.run.threads);
    std::ostringstream csv;
    write_mi_csv(csv, rows);
    std::cout << csv.str();
    if (!g.out_dir.empty()) {
      fs::create_directories(g.out_dir);
      write_file(fs::path(g.out_dir) / "mi.csv", csv.str());
    }
  } catch (const Error& e) {
    std::cerr << "estimator failure: " << e.what() << '\n';
    return kExitProtocol;
  }
  return kExitOk;
}

int cmd_bench(const Globals& g) {
  AppConfig app;
  try {
    app = load(g);
    app.bench.validate();
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const BenchReport rep = run_bench(app.bench);
  std::ostringstream csv;
  write_bench_csv(csv, rep);
  std::cout << csv.str();
  for (const auto& p : rep.points) {
    if (p.median.distance < 1e-6 || p.median.share < 1e-6) {
      std::cerr << "warning: n=" << p.n << " d=" << p.d << " phase times are near timer resolution\n";
    }
  }
  std::cerr << "fit user_time ~ n*d: slope " << fmt_double(rep.user_vs_nd.slope) << " R^2 "
            << fmt_double(rep.user_vs_nd.r2) << '\n'
            << "fit decode_time ~ k*n^2*log2(n)^2: slope " << fmt_double(rep.decode_vs_kn2log2n.slope) << " R^2 "
            << fmt_double(rep.decode_vs_kn2log2n.r2) << '\n'
            << "per-user bytes match 8*((n-1)*ceil(d/ell) + k*n): " << (rep.bytes_match ? "yes" : "NO") << '\n';
  if (!g.out_dir.empty()) {
    fs::create_directories(g.out_dir);
    write_file(fs::path(g.out_dir) / "bench.csv", csv.str());
  }
  return kExitOk;
}

int cmd_audit(const std::string& target) {
  fs::path p = target;
  if (fs::is_directory(p)) p /= "transcript.jsonl";
  Transcript tr;
  try {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::BadConfig, "cannot read " + p.string());
    tr = read_transcript(in);
  } catch (const Error& e) {
    std::cerr << "transcript error: " << e.what() << '\n';
    return kExitConfig;
  }
  const AuditReport rep = audit_transcript(tr);
  std::cout << to_json(rep).dump(2) << '\n';
  return rep.pass ? kExitOk : kExitAudit;
}

int cmd_selftest() {
  bool ok = true;
  for (const auto& r : selftest::run_all()) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.pass;
  }
  std::cout << (ok ? "selftest passed" : "selftest FAILED") << '\n';
  return ok ? kExitOk : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secure federated prompt personalization simulator"};
  app.require_subcommand(1);
  Globals g;
  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", g.seed, "override the config seed");
    sub->add_option("--out", g.out_dir, "output directory");
    sub->add_option("--threads", g.threads, "worker threads");
  };

  auto* run = app.add_subcommand("run", "run the full protocol and audit its transcript");
  add_globals(run);
  auto* mi = app.add_subcommand("mi", "leakage experiment grid, CSV on stdout");
  add_globals(mi);
  auto* bench = app.add_subcommand("bench", "per-phase cost grid, CSV on stdout");
  add_globals(bench);
  auto* audit = app.add_subcommand("audit", "audit a transcript.jsonl or a run directory");
  std::string audit_target;
  audit->add_option("transcript", audit_target, "transcript.jsonl or run directory")->required();
  add_globals(audit);
  auto* self = app.add_subcommand("selftest", "reduced oracle and special-function suites");
  add_globals(self);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(g);
    if (*mi) return cmd_mi(g);
    if (*bench) return cmd_bench(g);
    if (*audit) return cmd_audit(audit_target);
    if (*self) return cmd_selftest();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::BadConfig ? kExitConfig : kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitProtocol;
  }
  return kExitConfig;
}
