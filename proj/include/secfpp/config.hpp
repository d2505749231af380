#pragma once

// JSON configuration for the command-line tool. One document carries the
// protocol run settings at top level plus optional "mi" and "bench" grids.
// Unknown keys and type mismatches are rejected with the offending line.

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "secfpp/bench.hpp"
#include "secfpp/infotheory.hpp"
#include "secfpp/protocol.hpp"

namespace secfpp {

struct AppConfig {
  RunConfig run;
  MiGrid mi;
  BenchConfig bench;
};

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) : text_(text) {}

  // Offset of `"key"` searched from `from`; falls back to 0 when absent.
  std::size_t locate(const std::string& key, std::size_t from) const {
    const auto pos = text_.find("\"" + key + "\"", from);
    return pos == std::string::npos ? from : pos;
  }

  [[noreturn]] void fail(const std::string& path, std::size_t offset, const std::string& what) const {
    throw Error(ErrorCode::BadConfig,
                "line " + std::to_string(line_of_offset(text_, offset)) + ", field '" + path + "': " + what);
  }

  void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& prefix,
                      std::size_t from) const {
    if (!obj.is_object()) fail(prefix.empty() ? "<root>" : prefix, from, "expected a JSON object");
    for (const auto& [k, v] : obj.items()) {
      if (!allowed.count(k)) fail(prefix + k, locate(k, from), "unknown key");
    }
  }

  template <typename T>
  void unsigned_field(const nlohmann::json& obj, const std::string& key, const std::string& prefix, std::size_t from,
                      T& out) const {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned()) {
      fail(prefix + key, locate(key, from), "expected a non-negative integer");
    }
    out = static_cast<T>(v.get<std::uint64_t>());
  }

  void int_field(const nlohmann::json& obj, const std::string& key, const std::string& prefix, std::size_t from,
                 int& out) const {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) fail(prefix + key, locate(key, from), "expected an integer");
    out = v.get<int>();
  }

  void double_field(const nlohmann::json& obj, const std::string& key, const std::string& prefix, std::size_t from,
                    double& out) const {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number()) fail(prefix + key, locate(key, from), "expected a number");
    out = v.get<double>();
  }

  void bool_field(const nlohmann::json& obj, const std::string& key, const std::string& prefix, std::size_t from,
                  bool& out) const {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_boolean()) fail(prefix + key, locate(key, from), "expected true or false");
    out = v.get<bool>();
  }

  template <typename T>
  void unsigned_list(const nlohmann::json& obj, const std::string& key, const std::string& prefix, std::size_t from,
                     std::vector<T>& out) const {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_array()) fail(prefix + key, locate(key, from), "expected an array of positive integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 1) {
        fail(prefix + key, locate(key, from), "expected an array of positive integers");
      }
      out.push_back(static_cast<T>(e.get<std::int64_t>()));
    }
  }

  void optional_threshold(const nlohmann::json& obj, const std::string& key, const std::string& prefix,
                          std::size_t from, std::optional<double>& out) const {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (v.is_string() && v.get<std::string>() == "auto") {
      out.reset();
    } else if (v.is_number()) {
      out = v.get<double>();
    } else {
      fail(prefix + key, locate(key, from), "expected a number or \"auto\"");
    }
  }

 private:
  const std::string& text_;
};

}  // namespace detail

// Parses and validates. `seed_override` (from --seed) wins over the document;
// one of the two must supply a seed.
inline AppConfig parse_config(const std::string& text, std::optional<u64> seed_override = std::nullopt) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadConfig,
                "line " + std::to_string(detail::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1)) +
                    ": malformed JSON (" + e.what() + ")");
  }
  detail::ConfigReader rd(text);
  rd.reject_unknown(doc,
                    {"seed", "n", "rounds", "lr", "local_epochs", "k_tokens", "d_embed", "r_reduced", "lambda",
                     "alpha", "value_bound", "modulus", "ell", "basis", "dropout", "clustering", "secure", "robust",
                     "threads", "adaptive", "task", "mi", "bench"},
                    "", 0);

  AppConfig app;
  RunConfig& rc = app.run;
  bool have_seed = false;
  if (doc.contains("seed")) {
    rd.unsigned_field(doc, "seed", "", 0, rc.seed);
    have_seed = true;
  }
  if (seed_override) {
    rc.seed = *seed_override;
    have_seed = true;
  }
  if (!have_seed) {
    throw Error(ErrorCode::BadConfig, "field 'seed': a seed is mandatory (set \"seed\" or pass --seed)");
  }

  rd.unsigned_field(doc, "n", "", 0, rc.n);
  rd.unsigned_field(doc, "rounds", "", 0, rc.rounds);
  rd.double_field(doc, "lr", "", 0, rc.lr);
  rd.unsigned_field(doc, "local_epochs", "", 0, rc.local_epochs);
  rd.unsigned_field(doc, "k_tokens", "", 0, rc.k_tokens);
  rd.unsigned_field(doc, "d_embed", "", 0, rc.d_embed);
  rd.unsigned_field(doc, "r_reduced", "", 0, rc.r_reduced);
  rd.unsigned_field(doc, "lambda", "", 0, rc.lambda);
  rd.double_field(doc, "alpha", "", 0, rc.alpha);
  rd.double_field(doc, "value_bound", "", 0, rc.value_bound);
  rd.double_field(doc, "dropout", "", 0, rc.dropout);
  rd.bool_field(doc, "clustering", "", 0, rc.clustering);
  rd.bool_field(doc, "secure", "", 0, rc.secure);
  rd.bool_field(doc, "robust", "", 0, rc.robust);
  rd.unsigned_field(doc, "threads", "", 0, rc.threads);
  if (doc.contains("modulus")) {
    u64 q = 0;
    rd.unsigned_field(doc, "modulus", "", 0, q);
    rc.modulus = q;
  }
  if (doc.contains("ell")) {
    const auto& v = doc.at("ell");
    if (v.is_string() && v.get<std::string>() == "linear") {
      rc.linear_ell = true;
    } else if (v.is_string() && v.get<std::string>() == "auto") {
      rc.ell.reset();
    } else {
      std::size_t l = 0;
      rd.unsigned_field(doc, "ell", "", 0, l);
      rc.ell = l;
    }
  }
  if (doc.contains("basis")) {
    const auto& v = doc.at("basis");
    const std::string s = v.is_string() ? v.get<std::string>() : "";
    if (s == "shared-random") {
      rc.basis = BasisMode::SharedRandom;
    } else if (s == "svd-global") {
      rc.basis = BasisMode::SvdGlobal;
    } else {
      rd.fail("basis", rd.locate("basis", 0), "expected \"shared-random\" or \"svd-global\"");
    }
  }

  if (doc.contains("adaptive")) {
    const auto& a = doc.at("adaptive");
    const std::size_t at = rd.locate("adaptive", 0);
    rd.reject_unknown(a, {"theta_spawn", "theta_merge", "auto_factor_spawn", "auto_factor_merge", "merge"},
                      "adaptive.", at);
    rd.optional_threshold(a, "theta_spawn", "adaptive.", at, rc.adaptive.theta_spawn);
    rd.optional_threshold(a, "theta_merge", "adaptive.", at, rc.adaptive.theta_merge);
    rd.double_field(a, "auto_factor_spawn", "adaptive.", at, rc.adaptive.auto_factor_spawn);
    rd.double_field(a, "auto_factor_merge", "adaptive.", at, rc.adaptive.auto_factor_merge);
    rd.bool_field(a, "merge", "adaptive.", at, rc.adaptive.merge);
  }
  if (doc.contains("task")) {
    const auto& t = doc.at("task");
    const std::size_t at = rd.locate("task", 0);
    rd.reject_unknown(t, {"domains", "domain_scale", "local_sigma", "noise_sigma", "init_scale"}, "task.", at);
    rd.unsigned_field(t, "domains", "task.", at, rc.task.domains);
    rd.double_field(t, "domain_scale", "task.", at, rc.task.domain_scale);
    rd.double_field(t, "local_sigma", "task.", at, rc.task.local_sigma);
    rd.double_field(t, "noise_sigma", "task.", at, rc.task.noise_sigma);
    rd.double_field(t, "init_scale", "task.", at, rc.task.init_scale);
  }

  MiGrid& mg = app.mi;
  mg.n_values = {5, 10, 20, 40, 100};
  mg.d_values = {8, 32, 120, 512};
  mg.base.d = 120;
  mg.base.n = 20;
  mg.base.seed = rc.seed;
  if (doc.contains("mi")) {
    const auto& m = doc.at("mi");
    const std::size_t at = rd.locate("mi", 0);
    rd.reject_unknown(m,
                      {"n_values", "d_values", "full_product", "d", "n", "sample_count", "k_neighbors", "mu", "sigma",
                       "inside_cluster", "outer_samples"},
                      "mi.", at);
    rd.unsigned_list(m, "n_values", "mi.", at, mg.n_values);
    rd.unsigned_list(m, "d_values", "mi.", at, mg.d_values);
    rd.bool_field(m, "full_product", "mi.", at, mg.full_product);
    rd.int_field(m, "d", "mi.", at, mg.base.d);
    rd.int_field(m, "n", "mi.", at, mg.base.n);
    rd.unsigned_field(m, "sample_count", "mi.", at, mg.base.sample_count);
    rd.int_field(m, "k_neighbors", "mi.", at, mg.base.k_neighbors);
    rd.double_field(m, "mu", "mi.", at, mg.base.mu);
    rd.double_field(m, "sigma", "mi.", at, mg.base.sigma);
    rd.bool_field(m, "inside_cluster", "mi.", at, mg.base.inside_cluster);
    rd.unsigned_field(m, "outer_samples", "mi.", at, mg.base.outer_samples);
    // a one-entry axis is also the value held fixed while the other sweeps
    if (!m.contains("d") && mg.d_values.size() == 1) mg.base.d = mg.d_values.front();
    if (!m.contains("n") && mg.n_values.size() == 1) mg.base.n = mg.n_values.front();
    for (int v : mg.n_values) {
      if (v < 2 || v > 200) rd.fail("mi.n_values", rd.locate("n_values", at), "entries must lie in [2, 200]");
    }
    for (int v : mg.d_values) {
      if (v < 2 || v > 512) rd.fail("mi.d_values", rd.locate("d_values", at), "entries must lie in [2, 512]");
    }
  }

  BenchConfig& bc = app.bench;
  bc.seed = rc.seed;
  bc.alpha = rc.alpha;
  bc.lambda = rc.lambda;
  if (doc.contains("bench")) {
    const auto& b = doc.at("bench");
    const std::size_t at = rd.locate("bench", 0);
    rd.reject_unknown(b, {"n_values", "d_values", "k_clusters", "repeats"}, "bench.", at);
    rd.unsigned_list(b, "n_values", "bench.", at, bc.n_values);
    rd.unsigned_list(b, "d_values", "bench.", at, bc.d_values);
    rd.unsigned_field(b, "k_clusters", "bench.", at, bc.k_clusters);
    rd.unsigned_field(b, "repeats", "bench.", at, bc.repeats);
  }

  // total validation before any work starts
  rc.validate();
  try {
    mg.base.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::BadConfig, std::string("mi: ") + e.what());
  }
  bc.validate();
  return app;
}

// Canonical JSON of the effective configuration; hashed into the run id.
inline nlohmann::json to_json(const RunConfig& rc) {
  nlohmann::json j;
  j["seed"] = rc.seed;
  j["n"] = rc.n;
  j["rounds"] = rc.rounds;
  j["lr"] = rc.lr;
  j["local_epochs"] = rc.local_epochs;
  j["k_tokens"] = rc.k_tokens;
  j["d_embed"] = rc.d_embed;
  j["r_reduced"] = rc.r_reduced;
  j["lambda"] = rc.lambda;
  j["alpha"] = rc.alpha;
  j["value_bound"] = rc.value_bound;
  if (rc.modulus) j["modulus"] = *rc.modulus;
  if (rc.linear_ell) {
    j["ell"] = "linear";
  } else if (rc.ell) {
    j["ell"] = *rc.ell;
  }
  j["basis"] = rc.basis == BasisMode::SharedRandom ? "shared-random" : "svd-global";
  j["dropout"] = rc.dropout;
  j["clustering"] = rc.clustering;
  j["secure"] = rc.secure;
  j["robust"] = rc.robust;
  auto thr = [](const std::optional<double>& v) -> nlohmann::json {
    if (v) return *v;
    return "auto";
  };
  j["adaptive"] = {{"theta_spawn", thr(rc.adaptive.theta_spawn)},
                   {"theta_merge", thr(rc.adaptive.theta_merge)},
                   {"auto_factor_spawn", rc.adaptive.auto_factor_spawn},
                   {"auto_factor_merge", rc.adaptive.auto_factor_merge},
                   {"merge", rc.adaptive.merge}};
  j["task"] = {{"domains", rc.task.domains},
               {"domain_scale", rc.task.domain_scale},
               {"local_sigma", rc.task.local_sigma},
               {"noise_sigma", rc.task.noise_sigma},
               {"init_scale", rc.task.init_scale}};
  return j;
}

// threads is excluded so that the same experiment maps to the same directory
inline std::string run_id(const RunConfig& rc) {
  const std::string canon = to_json(rc).dump();
  u64 h = 1469598103934665603ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace secfpp
