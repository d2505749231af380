#pragma once

// Append-only message log of a simulated run and the honest-but-curious
// audit over it.

#include <cstdint>
#include <cstring>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "secfpp/field.hpp"

namespace secfpp {

inline constexpr long kServer = -1;

namespace kind {
inline constexpr const char* kPromptShare = "prompt-share";
inline constexpr const char* kGradientShare = "gradient-share";
inline constexpr const char* kDistanceShare = "distance-share";
inline constexpr const char* kCenterGapShare = "center-gap-share";
inline constexpr const char* kAggregateShare = "aggregate-share";
inline constexpr const char* kAssignmentAck = "assignment-ack";
inline constexpr const char* kAssignmentBroadcast = "assignment-broadcast";
inline constexpr const char* kAggregateBroadcast = "aggregate-broadcast";
}  // namespace kind

// How the payload relates to private data: an LCC share of a private
// vector, a share-domain function of shares, or cleartext.
enum class Encoding { Share, CodedResult, Plain };

inline const char* to_string(Encoding e) {
  switch (e) {
    case Encoding::Share: return "share";
    case Encoding::CodedResult: return "coded";
    case Encoding::Plain: return "plain";
  }
  return "?";
}

struct TranscriptRecord {
  std::uint64_t seq = 0;
  std::size_t round = 0;
  long sender = 0;
  long receiver = 0;
  std::string kind;
  Encoding encoding = Encoding::Share;
  std::size_t size_bytes = 0;
  std::uint64_t digest = 0;
};

// Server-side reconstruction, checked against the decoding policy.
struct ReconEvent {
  std::size_t round = 0;
  std::string purpose;  // distance | center-gap | aggregate
  std::size_t degree = 0;
  std::size_t shares = 0;
};

// Code parameters the run committed to; the audit derives the allowed
// decoding degree of each purpose from these.
struct DecodingPolicy {
  std::size_t n = 0;
  std::size_t ell = 1;
  std::size_t t = 1;

  std::size_t degree_for(const std::string& purpose) const {
    const std::size_t base = ell + t - 1;
    return purpose == "aggregate" ? base : 2 * base;
  }
};

inline std::uint64_t fnv1a(std::span<const FieldElement> payload) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto e : payload) {
    for (int b = 0; b < 8; ++b) {
      h ^= (e.value >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

inline std::uint64_t fnv1a(std::span<const double> payload) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double d : payload) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(d));
    std::memcpy(&bits, &d, sizeof d);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

class Transcript {
 public:
  void append(std::size_t round, long sender, long receiver, std::string kind, Encoding enc,
              std::size_t size_bytes, std::uint64_t digest) {
    records_.push_back({next_seq_++, round, sender, receiver, std::move(kind), enc, size_bytes, digest});
  }
  void append(std::size_t round, long sender, long receiver, std::string kind, Encoding enc,
              std::span<const FieldElement> payload) {
    append(round, sender, receiver, std::move(kind), enc, payload.size() * sizeof(u64), fnv1a(payload));
  }
  void add_recon(ReconEvent ev) { recons_.push_back(std::move(ev)); }
  void set_policy(DecodingPolicy p) { policy_ = p; }
  const DecodingPolicy& policy() const { return policy_; }

  const std::vector<TranscriptRecord>& records() const { return records_; }
  const std::vector<ReconEvent>& recons() const { return recons_; }
  std::vector<TranscriptRecord>& mutable_records() { return records_; }

  void clear() {
    records_.clear();
    recons_.clear();
    next_seq_ = 0;
  }

 private:
  std::vector<TranscriptRecord> records_;
  std::vector<ReconEvent> recons_;
  DecodingPolicy policy_;
  std::uint64_t next_seq_ = 0;
};

struct AuditReport {
  bool pass = true;
  std::size_t records_checked = 0;
  std::size_t recons_checked = 0;
  std::vector<std::string> violations;
};

inline std::string party_name(long p) { return p == kServer ? "server" : "u" + std::to_string(p); }

inline AuditReport audit_transcript(const Transcript& tr) {
  static const std::set<std::string> server_inbox = {kind::kDistanceShare, kind::kCenterGapShare,
                                                     kind::kAggregateShare, kind::kAssignmentAck};
  static const std::set<std::string> user_to_user = {kind::kPromptShare, kind::kGradientShare};
  static const std::set<std::string> server_outbox = {kind::kAssignmentBroadcast, kind::kAggregateBroadcast};
  static const std::map<std::string, Encoding> wire_encoding = {
      {kind::kPromptShare, Encoding::Share},        {kind::kGradientShare, Encoding::Share},
      {kind::kDistanceShare, Encoding::CodedResult}, {kind::kCenterGapShare, Encoding::CodedResult},
      {kind::kAggregateShare, Encoding::CodedResult}, {kind::kAssignmentAck, Encoding::Plain},
      {kind::kAssignmentBroadcast, Encoding::Plain}, {kind::kAggregateBroadcast, Encoding::Plain}};

  AuditReport rep;
  auto flag = [&](const TranscriptRecord& r, const std::string& why) {
    rep.pass = false;
    rep.violations.push_back("record " + std::to_string(r.seq) + " (round " + std::to_string(r.round) + ", " +
                             party_name(r.sender) + " -> " + party_name(r.receiver) + ", " + r.kind + "): " + why);
  };

  for (const auto& r : tr.records()) {
    ++rep.records_checked;
    if (r.sender == r.receiver) flag(r, "self-addressed message");
    if (r.receiver == kServer && !server_inbox.count(r.kind)) flag(r, "kind not allowed at the server");
    if (r.sender == kServer && !server_outbox.count(r.kind)) flag(r, "kind not allowed from the server");
    if (r.sender != kServer && r.receiver != kServer && !user_to_user.count(r.kind)) {
      flag(r, "kind not allowed between users");
    }
    auto it = wire_encoding.find(r.kind);
    if (it == wire_encoding.end()) {
      flag(r, "unknown message kind");
    } else if (r.sender != kServer && r.encoding != it->second) {
      flag(r, std::string("payload encoded as ") + to_string(r.encoding) + ", expected " + to_string(it->second));
    }
    if (r.sender != kServer && r.encoding == Encoding::Plain && r.kind != kind::kAssignmentAck) {
      flag(r, "unshared payload leaves a user");
    }
  }

  static const std::set<std::string> purposes = {"distance", "center-gap", "aggregate"};
  for (const auto& ev : tr.recons()) {
    ++rep.recons_checked;
    const std::string where = "reconstruction (round " + std::to_string(ev.round) + ", " + ev.purpose + ")";
    if (!purposes.count(ev.purpose)) {
      rep.pass = false;
      rep.violations.push_back(where + ": purpose outside the disclosure set");
    }
    const auto& pol = tr.policy();
    const std::size_t expected = pol.degree_for(ev.purpose);
    if (ev.degree != expected) {
      rep.pass = false;
      rep.violations.push_back(where + ": degree " + std::to_string(ev.degree) + ", policy requires " +
                               std::to_string(expected));
    }
    if (ev.shares < ev.degree + 1 || ev.shares > pol.n) {
      rep.pass = false;
      rep.violations.push_back(where + ": " + std::to_string(ev.shares) + " shares used for degree " +
                               std::to_string(ev.degree) + " with n = " + std::to_string(pol.n));
    }
  }
  return rep;
}

}  // namespace secfpp
