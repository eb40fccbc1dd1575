#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "wmr/kernel.hpp"

namespace wmr {

// Adversarial corpus for the kernel/executor boundary. Every vector tries to
// effect a protected state change without a properly authorized token; a
// vector "bypasses" when the change happens anyway.

struct AttackOutcome {
  std::string name;
  bool bypassed = false;
};

struct AttackSummary {
  std::vector<AttackOutcome> outcomes;
  std::size_t bypasses() const {
    std::size_t n = 0;
    for (const auto& o : outcomes) n += o.bypassed;
    return n;
  }
  std::size_t total() const { return outcomes.size(); }
};

namespace detail {

struct AttackCtx {
  std::unique_ptr<KernelService> service;
  std::unique_ptr<KernelClient> client;
  std::function<bool(const AuthToken&, const ActionDescriptor&)> verify;
  std::string operator_credential = "op-secret";
  int state_changes = 0;

  unsigned char attacker_pk[crypto_sign_PUBLICKEYBYTES];
  unsigned char attacker_sk[crypto_sign_SECRETKEYBYTES];

  explicit AttackCtx(std::uint64_t seed_salt, bool stub_verifier) {
    crypto_init();
    service = std::make_unique<KernelService>(Seed{0xA77ACull ^ seed_salt},
                                              operator_credential);
    client = std::make_unique<KernelClient>(*service);
    crypto_sign_keypair(attacker_pk, attacker_sk);
    if (stub_verifier)
      verify = [](const AuthToken&, const ActionDescriptor&) { return true; };
    else
      verify = [this](const AuthToken& t, const ActionDescriptor& d) {
        return client->verify(t, d);
      };
  }

  ActionDescriptor descriptor(ActionClass cls = ActionClass::GraphMutation,
                              Autonomy level = Autonomy::A5,
                              const std::string& target = "graph/node") {
    ActionDescriptor d;
    d.action_class = cls;
    d.target = target;
    d.params_digest = sha256_hex("params");
    d.requester = "attacker";
    d.autonomy_level = level;
    return d;
  }

  std::optional<AuthToken> issue(const ActionDescriptor& d,
                                 const std::map<std::string, std::string>& extra = {}) {
    auto r = client->authorize(d, extra);
    return r.token;
  }

  // The guarded operation: mutates state only if the executor-side check
  // accepts the presented token.
  bool attempt(const AuthToken& t, const ActionDescriptor& d) {
    if (!verify(t, d)) return false;
    ++state_changes;
    return true;
  }

  AuthToken forge(const ActionDescriptor& d, std::uint64_t expires = 60) {
    AuthToken t;
    t.descriptor_digest = d.digest();
    t.nonce = std::string(32, 'a');
    t.issued_at = 0;
    t.expires_at = expires;
    attacker_sign(t);
    return t;
  }

  void attacker_sign(AuthToken& t) {
    unsigned char sig[crypto_sign_BYTES];
    std::string payload = t.signed_payload();
    crypto_sign_detached(sig, nullptr,
                         reinterpret_cast<const unsigned char*>(payload.data()),
                         payload.size(), attacker_sk);
    char hex[crypto_sign_BYTES * 2 + 1];
    sodium_bin2hex(hex, sizeof hex, sig, sizeof sig);
    t.signature = hex;
  }

  // Raw wire request; bypass iff the kernel answers with an issued token.
  bool raw_yields_token(const std::string& bytes) {
    try {
      auto resp = wire::decode(service->handle(bytes));
      return resp.count("ok") && resp["ok"] == "1" && resp.count("signature");
    } catch (...) {
      return false;
    }
  }
};

struct AttackVector {
  std::string name;
  std::function<bool(AttackCtx&)> run;  // true = bypassed
};

inline std::vector<AttackVector> attack_corpus() {
  using C = AttackCtx;
  std::vector<AttackVector> v;
  auto add = [&](std::string name, std::function<bool(C&)> fn) {
    v.push_back({std::move(name), std::move(fn)});
  };

  // --- token-less and signature-mangling attacks -------------------------
  add("missing token", [](C& c) {
    auto d = c.descriptor();
    return c.attempt(AuthToken{}, d);
  });
  add("zeroed signature", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.signature.assign(t.signature.size(), '0');
    return c.attempt(t, d);
  });
  add("truncated signature", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.signature.resize(t.signature.size() / 2);
    return c.attempt(t, d);
  });
  add("signature first byte flipped", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.signature[0] = t.signature[0] == 'f' ? '0' : 'f';
    return c.attempt(t, d);
  });
  add("signature last byte flipped", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    auto& ch = t.signature.back();
    ch = ch == 'f' ? '0' : 'f';
    return c.attempt(t, d);
  });
  add("random signature", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.signature = sha256_hex("garbage") + sha256_hex("more");
    return c.attempt(t, d);
  });
  add("overlong signature", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.signature += "ab";
    return c.attempt(t, d);
  });
  add("non-hex signature", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.signature[10] = 'z';
    return c.attempt(t, d);
  });
  add("empty signature", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.signature.clear();
    return c.attempt(t, d);
  });

  // --- descriptor tampering (digest binding) -----------------------------
  add("tampered target", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    auto d2 = d;
    d2.target = "registry/other";
    return c.attempt(t, d2);
  });
  add("tampered action class", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    auto d2 = d;
    d2.action_class = ActionClass::Untrain;
    return c.attempt(t, d2);
  });
  add("tampered params digest", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    auto d2 = d;
    d2.params_digest = sha256_hex("other-params");
    return c.attempt(t, d2);
  });
  add("tampered requester", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    auto d2 = d;
    d2.requester = "innocent";
    return c.attempt(t, d2);
  });
  add("escalated autonomy in descriptor", [](C& c) {
    auto d = c.descriptor(ActionClass::GraphMutation, Autonomy::A2);
    auto t = *c.issue(d);
    auto d2 = d;
    d2.autonomy_level = Autonomy::A6;
    return c.attempt(t, d2);
  });
  add("token for X presented with Y", [](C& c) {
    auto dx = c.descriptor(ActionClass::GraphMutation, Autonomy::A5, "x");
    auto dy = c.descriptor(ActionClass::GraphMutation, Autonomy::A5, "y");
    auto t = *c.issue(dx);
    return c.attempt(t, dy);
  });
  add("flipped descriptor digest field", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.descriptor_digest[0] = t.descriptor_digest[0] == 'f' ? '0' : 'f';
    return c.attempt(t, d);
  });

  // --- replay and nonce games --------------------------------------------
  add("replayed token", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    c.attempt(t, d);  // legitimate first use
    int before = c.state_changes;
    bool again = c.attempt(t, d);
    return again && c.state_changes > before;
  });
  add("replay with copied descriptor", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    c.attempt(t, d);
    ActionDescriptor copy = d;
    return c.attempt(t, copy);
  });
  add("nonce transplanted from spent token", [](C& c) {
    auto d = c.descriptor();
    auto t1 = *c.issue(d);
    c.attempt(t1, d);
    auto t2 = *c.issue(d);
    t2.nonce = t1.nonce;  // breaks signature as a bonus
    return c.attempt(t2, d);
  });
  add("empty nonce", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.nonce.clear();
    return c.attempt(t, d);
  });
  add("short nonce", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.nonce.pop_back();
    return c.attempt(t, d);
  });

  // --- expiry games -------------------------------------------------------
  add("expired token", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    c.client->advance_ticks(kTokenExpiryTicks + 1);
    return c.attempt(t, d);
  });
  add("forged extended expiry", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    c.client->advance_ticks(kTokenExpiryTicks + 1);
    t.expires_at += 1'000'000;  // signature no longer covers this
    return c.attempt(t, d);
  });
  add("edited issued_at", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.issued_at += 7;
    return c.attempt(t, d);
  });
  add("token postdated by attacker", [](C& c) {
    auto d = c.descriptor();
    auto t = c.forge(d, 1'000'000);
    return c.attempt(t, d);
  });

  // --- wrong-key and scheme attacks --------------------------------------
  add("attacker-signed token", [](C& c) {
    auto d = c.descriptor();
    auto t = c.forge(d);
    return c.attempt(t, d);
  });
  add("attacker re-signs edited payload", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.expires_at += 500;
    c.attacker_sign(t);
    return c.attempt(t, d);
  });
  add("scheme downgrade to none", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.scheme = "none";
    t.signature.clear();
    return c.attempt(t, d);
  });
  add("scheme swap with forged mac", [](C& c) {
    auto d = c.descriptor();
    auto t = *c.issue(d);
    t.scheme = "hmac-sha256";
    t.signature = sha256_hex(t.signed_payload());
    return c.attempt(t, d);
  });

  // --- policy denials followed by forgery --------------------------------
  auto denial_then_forge = [](C& c, ActionDescriptor d,
                              std::map<std::string, std::string> extra = {}) {
    auto issued = c.issue(d, extra);
    if (issued) return c.attempt(*issued, d);  // kernel should have refused
    return c.attempt(c.forge(d), d);
  };
  add("external effect at A1", [=](C& c) {
    return denial_then_forge(c, c.descriptor(ActionClass::ExternalEffect, Autonomy::A1));
  });
  add("external effect at A2", [=](C& c) {
    return denial_then_forge(c, c.descriptor(ActionClass::ExternalEffect, Autonomy::A2));
  });
  add("external effect at A3 sans operator approval", [=](C& c) {
    return denial_then_forge(c, c.descriptor(ActionClass::ExternalEffect, Autonomy::A3));
  });
  add("self-modification below top autonomy", [=](C& c) {
    c.service->register_gauntlet_evidence("ev-1");
    return denial_then_forge(c, c.descriptor(ActionClass::RSIApply, Autonomy::A5),
                             {{"gauntlet_evidence", "ev-1"}});
  });
  add("self-modification without validation evidence", [=](C& c) {
    return denial_then_forge(c, c.descriptor(ActionClass::RSIApply, Autonomy::A6));
  });
  add("self-modification with fabricated approval id", [=](C& c) {
    return denial_then_forge(c, c.descriptor(ActionClass::RSIApply, Autonomy::A6),
                             {{"approval_id", "made-up"}});
  });
  add("pinned immutable target", [=](C& c) {
    c.service->register_pin("kernel/policy");
    return denial_then_forge(
        c, c.descriptor(ActionClass::Untrain, Autonomy::A5, "kernel/policy"));
  });

  // --- emergency-stop supremacy ------------------------------------------
  add("authorize during emergency", [=](C& c) {
    c.client->emergency_stop();
    return denial_then_forge(c, c.descriptor());
  });
  add("clear emergency with wrong credential", [=](C& c) {
    c.client->emergency_stop();
    c.client->clear_emergency("not-the-secret");
    return denial_then_forge(c, c.descriptor());
  });
  add("emergency sweep over every action class", [=](C& c) {
    c.client->emergency_stop();
    bool any = false;
    for (auto cls : {ActionClass::GraphMutation, ActionClass::ModelRegistration,
                     ActionClass::Untrain, ActionClass::RSIApply,
                     ActionClass::ConstraintRelaxation, ActionClass::ExternalEffect})
      any = any || denial_then_forge(c, c.descriptor(cls, Autonomy::A6));
    return any;
  });

  // --- malformed descriptors and raw wire attacks ------------------------
  add("empty requester", [=](C& c) {
    auto d = c.descriptor();
    d.requester.clear();
    return denial_then_forge(c, d);
  });
  add("empty params digest", [=](C& c) {
    auto d = c.descriptor();
    d.params_digest.clear();
    return denial_then_forge(c, d);
  });
  add("bogus action class over the wire", [](C& c) {
    return c.raw_yields_token(wire::encode({{"op", "authorize"},
                                            {"action_class", "RootShell"},
                                            {"target", "t"},
                                            {"params_digest", "d"},
                                            {"requester", "r"},
                                            {"autonomy_level", "A5"}}));
  });
  add("bogus autonomy level over the wire", [](C& c) {
    return c.raw_yields_token(wire::encode({{"op", "authorize"},
                                            {"action_class", "GraphMutation"},
                                            {"target", "t"},
                                            {"params_digest", "d"},
                                            {"requester", "r"},
                                            {"autonomy_level", "A9"}}));
  });
  add("truncated wire message", [](C& c) {
    return c.raw_yields_token(std::string("\x00\x00", 2));
  });
  add("wire length prefix mismatch", [](C& c) {
    std::string msg = wire::encode({{"op", "authorize"}});
    msg[3] = char(msg[3] + 5);
    return c.raw_yields_token(msg);
  });
  add("unknown wire op", [](C& c) {
    return c.raw_yields_token(wire::encode({{"op", "export_private_key"}}));
  });

  return v;
}

}  // namespace detail

inline AttackSummary run_attack_suite(bool stub_verifier = false) {
  AttackSummary s;
  auto corpus = detail::attack_corpus();
  std::uint64_t salt = 0;
  for (const auto& vec : corpus) {
    detail::AttackCtx ctx(salt++, stub_verifier);
    AttackOutcome o;
    o.name = vec.name;
    o.bypassed = vec.run(ctx);
    s.outcomes.push_back(o);
  }
  return s;
}

}  // namespace wmr
