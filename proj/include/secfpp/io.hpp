#pragma once

// On-disk artifacts of a run: transcript.jsonl, metrics.jsonl, summary.csv
// and audit.json. The transcript format is read back by the audit command.

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "secfpp/bench.hpp"
#include "secfpp/infotheory.hpp"
#include "secfpp/protocol.hpp"
#include "secfpp/transcript.hpp"

namespace secfpp {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline long parse_party(const std::string& s) {
  if (s == "server") return kServer;
  if (s.size() < 2 || s[0] != 'u' || s.find_first_not_of("0123456789", 1) != std::string::npos) {
    throw Error(ErrorCode::BadConfig, "bad party name '" + s + "'");
  }
  return std::stol(s.substr(1));
}

inline Encoding parse_encoding(const std::string& s) {
  if (s == "share") return Encoding::Share;
  if (s == "coded") return Encoding::CodedResult;
  if (s == "plain") return Encoding::Plain;
  throw Error(ErrorCode::BadConfig, "bad encoding '" + s + "'");
}

// First line is the decoding policy, then messages and reconstruction events
// in the order they happened.
inline void write_transcript(std::ostream& os, const Transcript& tr) {
  const auto& p = tr.policy();
  os << nlohmann::json{{"type", "policy"}, {"n", p.n}, {"ell", p.ell}, {"t", p.t}}.dump() << '\n';
  for (const auto& r : tr.records()) {
    nlohmann::json j{{"type", "message"},
                     {"seq", r.seq},
                     {"round", r.round},
                     {"from", party_name(r.sender)},
                     {"to", party_name(r.receiver)},
                     {"kind", r.kind},
                     {"encoding", to_string(r.encoding)},
                     {"bytes", r.size_bytes},
                     {"digest", hex64(r.digest)}};
    os << j.dump() << '\n';
  }
  for (const auto& ev : tr.recons()) {
    nlohmann::json j{{"type", "recon"},
                     {"round", ev.round},
                     {"purpose", ev.purpose},
                     {"degree", ev.degree},
                     {"shares", ev.shares}};
    os << j.dump() << '\n';
  }
}

inline Transcript read_transcript(std::istream& is) {
  Transcript tr;
  std::string line;
  std::size_t lineno = 0;
  bool saw_policy = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "policy") {
        tr.set_policy({j.at("n").get<std::size_t>(), j.at("ell").get<std::size_t>(), j.at("t").get<std::size_t>()});
        saw_policy = true;
      } else if (type == "message") {
        tr.append(j.at("round").get<std::size_t>(), parse_party(j.at("from").get<std::string>()),
                  parse_party(j.at("to").get<std::string>()), j.at("kind").get<std::string>(),
                  parse_encoding(j.at("encoding").get<std::string>()), j.at("bytes").get<std::size_t>(),
                  std::stoull(j.at("digest").get<std::string>(), nullptr, 16));
      } else if (type == "recon") {
        tr.add_recon({j.at("round").get<std::size_t>(), j.at("purpose").get<std::string>(),
                      j.at("degree").get<std::size_t>(), j.at("shares").get<std::size_t>()});
      } else {
        throw Error(ErrorCode::BadConfig, "unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BadConfig, "transcript line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::BadConfig, "transcript line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!saw_policy) throw Error(ErrorCode::BadConfig, "transcript has no policy line");
  return tr;
}

inline nlohmann::json to_json(const AuditReport& rep) {
  return {{"pass", rep.pass},
          {"records_checked", rep.records_checked},
          {"recons_checked", rep.recons_checked},
          {"violations", rep.violations}};
}

// metrics.jsonl carries wall-clock timings and is therefore not byte-stable;
// summary.csv holds only deterministic columns.
inline nlohmann::json to_json(const RoundMetrics& m) {
  return {{"round", m.round},
          {"mean_loss", m.mean_loss},
          {"loss", m.loss},
          {"clusters", m.assignment.clusters},
          {"responding", m.responding},
          {"seconds",
           {{"share", m.times.share},
            {"distance", m.times.distance},
            {"decode", m.times.decode},
            {"aggregate", m.times.aggregate},
            {"server_cluster", m.times.server_cluster}}}};
}

inline void write_summary_header(std::ostream& os) {
  os << "round,mean_loss,max_loss,clusters,responding\n";
}

inline void write_summary_row(std::ostream& os, const RoundMetrics& m) {
  double mx = 0;
  for (double l : m.loss) mx = std::max(mx, l);
  os << m.round << ',' << fmt_double(m.mean_loss) << ',' << fmt_double(mx) << ',' << m.assignment.size() << ','
     << m.responding.size() << '\n';
}

// Wide layout: one row per (n, d) point, one column per trajectory, plus a
// standard-error column for each Monte-Carlo quantity.
inline void write_mi_csv(std::ostream& os, const std::vector<MiRow>& rows) {
  std::vector<std::string> cols;
  std::vector<std::string> se_cols;
  std::vector<std::pair<int, int>> points;
  std::map<std::pair<int, int>, std::map<std::string, const MiRow*>> cell;
  for (const auto& r : rows) {
    if (std::find(cols.begin(), cols.end(), r.quantity) == cols.end()) cols.push_back(r.quantity);
    if (r.stderr_ != 0 && std::find(se_cols.begin(), se_cols.end(), r.quantity) == se_cols.end()) {
      se_cols.push_back(r.quantity);
    }
    const std::pair<int, int> key{r.n, r.d};
    if (!cell.count(key)) points.push_back(key);
    cell[key][r.quantity] = &r;
  }
  os << "n,d";
  for (const auto& c : cols) os << ',' << c;
  for (const auto& c : se_cols) os << ',' << c << "_se";
  os << '\n';
  for (const auto& key : points) {
    const auto& row = cell[key];
    os << key.first << ',' << key.second;
    for (const auto& c : cols) {
      os << ',';
      if (auto it = row.find(c); it != row.end()) os << fmt_double(it->second->estimate);
    }
    for (const auto& c : se_cols) {
      os << ',';
      if (auto it = row.find(c); it != row.end()) os << fmt_double(it->second->stderr_);
    }
    os << '\n';
  }
}

inline void write_bench_csv(std::ostream& os, const BenchReport& rep) {
  os << "n,d,phase,wall_time,bytes_sent\n";
  for (const auto& p : rep.points) {
    for (const auto& r : to_records(p)) {
      os << r.n << ',' << r.d << ',' << r.phase << ',' << fmt_double(r.wall_time) << ',' << r.bytes_sent << '\n';
    }
  }
}

}  // namespace secfpp
