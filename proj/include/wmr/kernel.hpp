#pragma once

#include <sodium.h>

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wmr/canonical.hpp"
#include "wmr/digest.hpp"
#include "wmr/errors.hpp"
#include "wmr/seed.hpp"

namespace wmr {

enum class ActionClass {
  GraphMutation,
  ModelRegistration,
  Untrain,
  RSIApply,
  ConstraintRelaxation,
  ExternalEffect
};

inline const char* to_string(ActionClass c) {
  switch (c) {
    case ActionClass::GraphMutation: return "GraphMutation";
    case ActionClass::ModelRegistration: return "ModelRegistration";
    case ActionClass::Untrain: return "Untrain";
    case ActionClass::RSIApply: return "RSIApply";
    case ActionClass::ConstraintRelaxation: return "ConstraintRelaxation";
    case ActionClass::ExternalEffect: return "ExternalEffect";
  }
  return "?";
}

inline std::optional<ActionClass> action_class_from(const std::string& s) {
  for (auto c : {ActionClass::GraphMutation, ActionClass::ModelRegistration,
                 ActionClass::Untrain, ActionClass::RSIApply,
                 ActionClass::ConstraintRelaxation, ActionClass::ExternalEffect})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

// A1 manual .. A6 open-ended self-improvement.
enum class Autonomy : int { A1 = 1, A2, A3, A4, A5, A6 };

inline std::string to_string(Autonomy a) {
  return "A" + std::to_string(static_cast<int>(a));
}

inline std::optional<Autonomy> autonomy_from(const std::string& s) {
  if (s.size() == 2 && s[0] == 'A' && s[1] >= '1' && s[1] <= '6')
    return static_cast<Autonomy>(s[1] - '0');
  return std::nullopt;
}

struct ActionDescriptor {
  ActionClass action_class = ActionClass::GraphMutation;
  std::string target;
  std::string params_digest;
  std::string requester;
  Autonomy autonomy_level = Autonomy::A1;

  std::string digest() const {
    std::map<std::string, std::string> kv;
    kv["action_class"] = to_string(action_class);
    kv["target"] = target;
    kv["params_digest"] = params_digest;
    kv["requester"] = requester;
    kv["autonomy_level"] = to_string(autonomy_level);
    return sha256_hex(canon_record(kv));
  }
};

struct AuthToken {
  std::string scheme = "ed25519";
  std::string descriptor_digest;
  std::string nonce;  // 32 hex chars = 128 bits
  std::uint64_t issued_at = 0;
  std::uint64_t expires_at = 0;
  std::string signature;  // hex

  std::string signed_payload() const {
    return descriptor_digest + "|" + nonce + "|" + canon_u64(issued_at) + "|" +
           canon_u64(expires_at);
  }

  std::map<std::string, std::string> to_record() const {
    return {{"scheme", scheme},
            {"descriptor_digest", descriptor_digest},
            {"nonce", nonce},
            {"issued_at", canon_u64(issued_at)},
            {"expires_at", canon_u64(expires_at)},
            {"signature", signature}};
  }

  static AuthToken from_record(const std::map<std::string, std::string>& kv) {
    AuthToken t;
    auto get = [&](const char* k) {
      auto it = kv.find(k);
      return it == kv.end() ? std::string() : it->second;
    };
    t.scheme = get("scheme");
    t.descriptor_digest = get("descriptor_digest");
    t.nonce = get("nonce");
    t.issued_at = std::strtoull(get("issued_at").c_str(), nullptr, 10);
    t.expires_at = std::strtoull(get("expires_at").c_str(), nullptr, 10);
    t.signature = get("signature");
    return t;
  }
};

struct Denial {
  std::string reason;
};

struct KernelHealth {
  bool emergency = false;
  std::uint64_t issued = 0;
  std::uint64_t denied = 0;
  std::uint64_t uptime_ticks = 0;
};

namespace wire {

// Length-prefixed canonical records: 4-byte big-endian length + record text.
inline std::string encode(const std::map<std::string, std::string>& kv) {
  std::string body = canon_record(kv);
  std::string out;
  std::uint32_t n = static_cast<std::uint32_t>(body.size());
  out.push_back(char((n >> 24) & 0xff));
  out.push_back(char((n >> 16) & 0xff));
  out.push_back(char((n >> 8) & 0xff));
  out.push_back(char(n & 0xff));
  out += body;
  return out;
}

inline std::map<std::string, std::string> decode(const std::string& msg) {
  if (msg.size() < 4) throw MalformedDescriptor("short wire message");
  std::uint32_t n = (std::uint32_t(std::uint8_t(msg[0])) << 24) |
                    (std::uint32_t(std::uint8_t(msg[1])) << 16) |
                    (std::uint32_t(std::uint8_t(msg[2])) << 8) |
                    std::uint32_t(std::uint8_t(msg[3]));
  if (msg.size() != 4 + n) throw MalformedDescriptor("wire length mismatch");
  return parse_record(msg.substr(4));
}

}  // namespace wire

inline constexpr std::uint64_t kTokenExpiryTicks = 60;
inline constexpr std::size_t kNonceCacheLimit = 1u << 20;

// The Safety Kernel. Runs behind the wire protocol even in-process; requests
// are handled serially. The signing key never leaves this class.
class KernelService {
 public:
  KernelService(Seed identity_seed, const std::string& operator_credential) {
    crypto_init();
    unsigned char kseed[crypto_sign_SEEDBYTES];
    SeedStream stream(identity_seed);
    for (std::size_t i = 0; i < sizeof kseed; i += 8) {
      std::uint64_t w = stream.next();
      for (std::size_t b = 0; b < 8 && i + b < sizeof kseed; ++b)
        kseed[i + b] = static_cast<unsigned char>(w >> (8 * b));
    }
    crypto_sign_seed_keypair(pk_, sk_, kseed);
    sodium_memzero(kseed, sizeof kseed);
    operator_credential_hash_ = sha256_hex(operator_credential);
    nonce_stream_ = std::make_unique<SeedStream>(derive_seed(identity_seed, "nonce"));
  }

  ~KernelService() { sodium_memzero(sk_, sizeof sk_); }

  KernelService(const KernelService&) = delete;
  KernelService& operator=(const KernelService&) = delete;

  // The only entry point: one serialized request at a time.
  std::string handle(const std::string& request) {
    std::lock_guard lock(mu_);
    ++ticks_;
    std::map<std::string, std::string> req;
    try {
      req = wire::decode(request);
    } catch (const Error&) {
      return wire::encode({{"ok", "0"}, {"reason", "malformed"}});
    }
    const std::string op = req.count("op") ? req.at("op") : "";
    if (op == "pubkey") return handle_pubkey();
    if (op == "authorize") return handle_authorize(req);
    if (op == "verify") return handle_verify(req);
    if (op == "estop") return handle_estop();
    if (op == "clear") return handle_clear(req);
    if (op == "health") return handle_health();
    if (op == "tick") return wire::encode({{"ok", "1"}, {"tick", canon_u64(ticks_)}});
    return wire::encode({{"ok", "0"}, {"reason", "unknown op"}});
  }

  // Privileged wiring used by trusted safety components at bootstrap; not
  // reachable over the wire.
  void register_pin(const std::string& module_id) {
    std::lock_guard lock(mu_);
    pinned_.insert(module_id);
  }

  void register_gauntlet_evidence(const std::string& verification_digest) {
    std::lock_guard lock(mu_);
    gauntlet_evidence_.insert(verification_digest);
  }

  void register_approval(const std::string& approval_id) {
    std::lock_guard lock(mu_);
    approvals_.insert(approval_id);
  }

 private:
  std::string handle_pubkey() {
    char hex[crypto_sign_PUBLICKEYBYTES * 2 + 1];
    sodium_bin2hex(hex, sizeof hex, pk_, crypto_sign_PUBLICKEYBYTES);
    return wire::encode({{"ok", "1"}, {"scheme", "ed25519"}, {"public_key", hex}});
  }

  std::string deny(const std::string& reason) {
    ++denied_;
    return wire::encode({{"ok", "0"}, {"reason", reason}});
  }

  std::string handle_authorize(const std::map<std::string, std::string>& req) {
    auto cls = action_class_from(value_of(req, "action_class"));
    auto level = autonomy_from(value_of(req, "autonomy_level"));
    const std::string target = value_of(req, "target");
    const std::string params_digest = value_of(req, "params_digest");
    const std::string requester = value_of(req, "requester");
    if (!cls || !level || params_digest.empty() || requester.empty())
      return deny("malformed descriptor");
    if (emergency_) return deny("emergency");
    if (pinned_.count(target)) return deny("immutable target");
    if (nonces_used_.size() >= kNonceCacheLimit) return deny("nonce cache full");

    if (*cls == ActionClass::RSIApply) {
      if (*level != Autonomy::A6) return deny("autonomy");
      const std::string evidence = value_of(req, "gauntlet_evidence");
      const std::string approval = value_of(req, "approval_id");
      bool has_evidence = !evidence.empty() && gauntlet_evidence_.count(evidence);
      bool has_approval = !approval.empty() && approvals_.count(approval);
      if (!has_evidence && !has_approval) return deny("unvalidated");
    }
    if (*cls == ActionClass::ExternalEffect) {
      if (*level == Autonomy::A1 || *level == Autonomy::A2) return deny("autonomy");
      if (*level == Autonomy::A3 && value_of(req, "operator_approval").empty())
        return deny("operator approval required");
    }

    ActionDescriptor d;
    d.action_class = *cls;
    d.target = target;
    d.params_digest = params_digest;
    d.requester = requester;
    d.autonomy_level = *level;

    AuthToken t;
    t.descriptor_digest = d.digest();
    t.nonce = fresh_nonce();
    t.issued_at = ticks_;
    t.expires_at = ticks_ + kTokenExpiryTicks;
    sign(t);
    ++issued_;
    auto rec = t.to_record();
    rec["ok"] = "1";
    if (*cls == ActionClass::ExternalEffect && *level == Autonomy::A4)
      notifications_.push_back("external effect authorized: " + target);
    return wire::encode(rec);
  }

  std::string handle_verify(const std::map<std::string, std::string>& req) {
    AuthToken t = AuthToken::from_record(req);
    auto fail = [&](const std::string& why) {
      verify_log_.push_back("fail:" + why);
      return wire::encode({{"ok", "1"}, {"valid", "0"}, {"why", why}});
    };
    if (t.scheme != "ed25519") return fail("scheme");
    const std::string expected_digest = value_of(req, "expected_descriptor_digest");
    if (expected_digest.empty() || t.descriptor_digest != expected_digest)
      return fail("descriptor mismatch");
    if (t.nonce.size() != 32) return fail("nonce format");
    if (ticks_ > t.expires_at) return fail("expired");
    if (t.issued_at > ticks_) return fail("not yet valid");
    if (nonces_used_.count(t.nonce)) return fail("nonce replay");

    unsigned char sig[crypto_sign_BYTES];
    if (t.signature.size() != crypto_sign_BYTES * 2) return fail("signature format");
    size_t bin_len = 0;
    if (sodium_hex2bin(sig, sizeof sig, t.signature.c_str(), t.signature.size(),
                       nullptr, &bin_len, nullptr) != 0 || bin_len != crypto_sign_BYTES)
      return fail("signature format");
    std::string payload = t.signed_payload();
    if (crypto_sign_verify_detached(sig,
                                    reinterpret_cast<const unsigned char*>(payload.data()),
                                    payload.size(), pk_) != 0)
      return fail("signature");
    nonces_used_.insert(t.nonce);  // single use
    return wire::encode({{"ok", "1"}, {"valid", "1"}});
  }

  std::string handle_estop() {
    emergency_ = true;
    return wire::encode({{"ok", "1"}, {"emergency", "1"}});
  }

  std::string handle_clear(const std::map<std::string, std::string>& req) {
    if (sha256_hex(value_of(req, "credential")) != operator_credential_hash_) {
      ++denied_;
      return wire::encode({{"ok", "0"}, {"reason", "unauthorized"}});
    }
    emergency_ = false;
    return wire::encode({{"ok", "1"}, {"emergency", "0"}});
  }

  std::string handle_health() {
    return wire::encode({{"ok", "1"},
                         {"emergency", emergency_ ? "1" : "0"},
                         {"issued", canon_u64(issued_)},
                         {"denied", canon_u64(denied_)},
                         {"uptime_ticks", canon_u64(ticks_)}});
  }

  static std::string value_of(const std::map<std::string, std::string>& kv,
                              const char* key) {
    auto it = kv.find(key);
    return it == kv.end() ? std::string() : it->second;
  }

  std::string fresh_nonce() {
    char hex[33];
    unsigned char bytes[16];
    std::uint64_t a = nonce_stream_->next(), b = nonce_stream_->next();
    for (int i = 0; i < 8; ++i) {
      bytes[i] = static_cast<unsigned char>(a >> (8 * i));
      bytes[8 + i] = static_cast<unsigned char>(b >> (8 * i));
    }
    sodium_bin2hex(hex, sizeof hex, bytes, sizeof bytes);
    return hex;
  }

  void sign(AuthToken& t) {
    unsigned char sig[crypto_sign_BYTES];
    std::string payload = t.signed_payload();
    crypto_sign_detached(sig, nullptr,
                         reinterpret_cast<const unsigned char*>(payload.data()),
                         payload.size(), sk_);
    char hex[crypto_sign_BYTES * 2 + 1];
    sodium_bin2hex(hex, sizeof hex, sig, sizeof sig);
    t.signature = hex;
  }

  std::mutex mu_;
  unsigned char pk_[crypto_sign_PUBLICKEYBYTES];
  unsigned char sk_[crypto_sign_SECRETKEYBYTES];
  std::string operator_credential_hash_;
  std::unique_ptr<SeedStream> nonce_stream_;
  bool emergency_ = false;
  std::uint64_t ticks_ = 0;
  std::uint64_t issued_ = 0;
  std::uint64_t denied_ = 0;
  std::set<std::string> nonces_used_;
  std::set<std::string> pinned_;
  std::set<std::string> gauntlet_evidence_;
  std::set<std::string> approvals_;
  std::vector<std::string> notifications_;
  std::vector<std::string> verify_log_;
};

// Client side of the protocol boundary. All interaction serializes through
// the transport, even when the kernel lives in-process.
class KernelClient {
 public:
  using Transport = std::function<std::string(const std::string&)>;

  explicit KernelClient(Transport transport) : transport_(std::move(transport)) {}

  explicit KernelClient(KernelService& svc)
      : transport_([&svc](const std::string& req) { return svc.handle(req); }) {}

  std::string public_key() {
    auto resp = call({{"op", "pubkey"}});
    return resp.count("public_key") ? resp["public_key"] : "";
  }

  struct AuthResult {
    std::optional<AuthToken> token;
    std::string denial_reason;
    bool authorized() const { return token.has_value(); }
  };

  AuthResult authorize(const ActionDescriptor& d,
                       const std::map<std::string, std::string>& extra = {}) {
    std::map<std::string, std::string> req = extra;
    req["op"] = "authorize";
    req["action_class"] = to_string(d.action_class);
    req["target"] = d.target;
    req["params_digest"] = d.params_digest;
    req["requester"] = d.requester;
    req["autonomy_level"] = to_string(d.autonomy_level);
    auto resp = call(req);
    AuthResult r;
    if (resp.count("ok") && resp["ok"] == "1")
      r.token = AuthToken::from_record(resp);
    else
      r.denial_reason = resp.count("reason") ? resp["reason"] : "unknown";
    return r;
  }

  bool verify(const AuthToken& t, const ActionDescriptor& d) {
    auto req = t.to_record();
    req["op"] = "verify";
    req["expected_descriptor_digest"] = d.digest();
    auto resp = call(req);
    return resp.count("valid") && resp["valid"] == "1";
  }

  void emergency_stop() { call({{"op", "estop"}}); }

  bool clear_emergency(const std::string& credential) {
    auto resp = call({{"op", "clear"}, {"credential", credential}});
    return resp.count("ok") && resp["ok"] == "1";
  }

  KernelHealth health() {
    auto resp = call({{"op", "health"}});
    KernelHealth h;
    h.emergency = resp["emergency"] == "1";
    h.issued = std::strtoull(resp["issued"].c_str(), nullptr, 10);
    h.denied = std::strtoull(resp["denied"].c_str(), nullptr, 10);
    h.uptime_ticks = std::strtoull(resp["uptime_ticks"].c_str(), nullptr, 10);
    return h;
  }

  void advance_ticks(std::uint64_t n) {
    for (std::uint64_t i = 0; i < n; ++i) call({{"op", "tick"}});
  }

 private:
  std::map<std::string, std::string> call(const std::map<std::string, std::string>& kv) {
    return wire::decode(transport_(wire::encode(kv)));
  }

  Transport transport_;
};

// The executor boundary: every governed state change presents its token here
// before the underlying operation runs.
class GovernedExecutor {
 public:
  explicit GovernedExecutor(KernelClient client) : client_(std::move(client)) {}

  struct Receipt {
    bool executed = false;
    std::string denial_reason;
    std::string action_digest;
  };

  Receipt execute(const ActionDescriptor& d, const AuthToken& token,
                  const std::function<void()>& action) {
    Receipt r;
    r.action_digest = d.digest();
    if (!client_.verify(token, d)) {
      r.denial_reason = "token verification failed";
      return r;
    }
    action();
    r.executed = true;
    return r;
  }

  KernelClient& kernel() { return client_; }

 private:
  KernelClient client_;
};

}  // namespace wmr
