#include "msglab/scenarios.hpp"

#include <json.hpp>

#include <algorithm>
#include <optional>
#include <sstream>

namespace msglab::scenarios {

namespace {

using nlohmann::json;
using session::Client;
using session::VerifyChannel;

const char* const kProperties[] = {
    "tofu",           "e2e-banner", "key-change-notification",
    "blocking",       "reencrypt-resend", "transmission-details",
    "qr",             "export",     "verified-check",
    "clear-trusted",
};

// Two clients sharing one world; scenarios build one per run.
struct Lab {
  simnet::World world;
  Client alice;
  Client bob;

  Lab(const PolicyProfile& profile, std::uint64_t seed,
      Protocol protocol = Protocol::kSignalLike)
      : world(seed),
        alice(world, "alice", profile, protocol),
        bob(world, "bob", profile, protocol) {}

  void start_pair() {
    alice.start_conversation("bob");
    if (alice.profile().e2e_opt_in) alice.enable_encryption("bob");
  }

  void settle(int rounds = 4) {
    for (int i = 0; i < rounds; ++i) {
      world.tick();
      if (world.online("alice")) alice.poll();
      if (world.online("bob")) bob.poll();
    }
  }

  // Start plus one delivered round-trip message from alice.
  std::uint64_t handshake() {
    start_pair();
    std::uint64_t id = alice.send_text("bob", "hello");
    settle();
    return id;
  }
};

std::optional<std::size_t> find_event(const std::vector<session::SessionEvent>& events,
                                      const std::string& kind) {
  for (std::size_t i = 0; i < events.size(); ++i)
    if (events[i].kind == kind) return i;
  return std::nullopt;
}

Cell judge_event(const ScenarioReport& report, const std::string& property,
                 const std::string& kind) {
  if (auto i = find_event(report.events, kind))
    return Cell{property, report.profile, "pass", "event:" + std::to_string(*i)};
  return Cell{property, report.profile, "fail", "absent:" + kind};
}

ScenarioReport make_report(const std::string& scenario,
                           const std::string& profile) {
  ScenarioReport r;
  r.scenario = scenario;
  r.profile = profile;
  return r;
}

std::vector<std::string> render_net_log(const simnet::World& world) {
  std::vector<std::string> out;
  for (const auto& e : world.log()) {
    std::ostringstream line;
    line << "t=" << e.tick << " seq=" << e.seq << ' ' << e.event << ' '
         << e.kind << ' ' << e.sender << "->" << e.recipient << ' ' << e.bytes
         << 'B';
    out.push_back(line.str());
  }
  return out;
}

void finish(ScenarioReport& report, Lab& lab) {
  report.events = lab.alice.events();
  report.net_log = render_net_log(lab.world);
}

Bytes ratchet_ad(const ratchet::MessageHeader& header) {
  return header.serialize();  // clients bind an empty caller ad
}

}  // namespace

const Cell* PropertyMatrix::find(const std::string& property,
                                 const std::string& profile) const {
  for (const auto& c : cells)
    if (c.property == property && c.profile == profile) return &c;
  return nullptr;
}

std::string PropertyMatrix::render_text() const {
  std::size_t prop_width = 8;
  for (const auto& p : properties) prop_width = std::max(prop_width, p.size());
  std::ostringstream out;
  out << std::string(prop_width, ' ');
  for (const auto& p : profiles) out << "  " << p;
  out << '\n';
  for (const auto& prop : properties) {
    out << prop << std::string(prop_width - prop.size(), ' ');
    for (const auto& profile : profiles) {
      const Cell* c = find(prop, profile);
      std::string v = c ? c->outcome : "?";
      out << "  " << v << std::string(profile.size() > v.size()
                                          ? profile.size() - v.size()
                                          : 0,
                                      ' ');
    }
    out << '\n';
  }
  return out.str();
}

std::string PropertyMatrix::render_structured() const {
  json cells_json = json::array();
  for (const auto& c : cells)
    cells_json.push_back({{"property", c.property},
                          {"profile", c.profile},
                          {"outcome", c.outcome},
                          {"evidence", c.evidence}});
  json j{{"schema", "matrix/1"},
         {"properties", properties},
         {"profiles", profiles},
         {"cells", cells_json}};
  return j.dump(2) + "\n";
}

std::string ScenarioReport::render_text() const {
  std::ostringstream out;
  out << "scenario " << scenario << " profile " << profile << '\n';
  for (const auto& c : cells)
    out << "  " << c.property << ": " << c.outcome << " [" << c.evidence
        << "]\n";
  for (const auto& n : notes) out << "  note: " << n << '\n';
  return out.str();
}

std::string ScenarioReport::render_structured() const {
  json cells_json = json::array();
  for (const auto& c : cells)
    cells_json.push_back({{"property", c.property},
                          {"profile", c.profile},
                          {"outcome", c.outcome},
                          {"evidence", c.evidence}});
  json events_json = json::array();
  for (const auto& e : events)
    events_json.push_back({{"tick", e.tick},
                           {"kind", e.kind},
                           {"peer", e.peer},
                           {"detail", e.detail}});
  json j{{"schema", "scenario/1"}, {"scenario", scenario},
         {"profile", profile},    {"cells", cells_json},
         {"notes", notes},        {"events", events_json},
         {"net_log", net_log}};
  return j.dump(2) + "\n";
}

ScenarioReport run_initial_setup(const PolicyProfile& profile,
                                 std::uint64_t seed) {
  ScenarioReport report = make_report("initial-setup", profile.name);
  Lab lab(profile, seed);
  lab.handshake();
  finish(report, lab);
  report.cells.push_back(judge_event(report, "tofu", "tofu_trusted"));
  report.cells.push_back(judge_event(report, "e2e-banner", "e2e_banner"));
  return report;
}

ScenarioReport run_key_change(const PolicyProfile& profile,
                              std::uint64_t seed) {
  ScenarioReport report = make_report("key-change", profile.name);
  Lab lab(profile, seed);
  lab.handshake();
  lab.bob.reinstall();
  lab.world.tick();
  lab.alice.poll();
  try {
    lab.alice.send_text("bob", "after the change");
    lab.settle();
  } catch (const SessionDead&) {
    report.notes.push_back("send after key change: SessionDead");
  }
  finish(report, lab);
  report.cells.push_back(
      judge_event(report, "key-change-notification", "key_changed"));
  report.cells.push_back(judge_event(report, "blocking", "message_blocked"));
  return report;
}

ScenarioReport run_key_change_in_transit(const PolicyProfile& profile,
                                         std::uint64_t seed) {
  ScenarioReport report = make_report("key-change-in-transit", profile.name);
  Lab lab(profile, seed);
  std::uint64_t m1 = lab.handshake();
  lab.world.set_online("bob", false);
  std::uint64_t m2 = lab.alice.send_text("bob", "in flight");
  lab.bob.reinstall();  // queued ciphertext for bob is gone with the keys
  lab.world.set_online("bob", true);
  lab.settle(6);
  finish(report, lab);

  bool resent = find_event(report.events, "resent").has_value();
  bool m2_delivered = false;
  try {
    m2_delivered = lab.alice.message_status(m2) == session::MsgStatus::kDelivered;
  } catch (const NotTracked&) {
  }
  if (resent && m2_delivered) {
    report.cells.push_back(Cell{
        "reencrypt-resend", profile.name, "pass",
        "event:" + std::to_string(*find_event(report.events, "resent"))});
  } else {
    report.cells.push_back(
        Cell{"reencrypt-resend", profile.name, "fail", "absent:resent"});
  }

  try {
    auto status = lab.alice.message_status(m1);
    report.cells.push_back(Cell{
        "transmission-details", profile.name, "pass",
        "event:" + std::to_string(*find_event(report.events, "status_changed"))});
    report.notes.push_back(
        std::string("first message status: ") +
        (status == session::MsgStatus::kDelivered ? "delivered" : "sent"));
  } catch (const NotTracked&) {
    report.cells.push_back(Cell{"transmission-details", profile.name, "fail",
                                "error:NotTracked"});
  }
  return report;
}

ScenarioReport run_verification(const PolicyProfile& profile,
                                std::uint64_t seed) {
  ScenarioReport report = make_report("verification", profile.name);
  Lab lab(profile, seed);
  lab.handshake();

  auto channel_cell = [&](const std::string& property, VerifyChannel channel) {
    try {
      lab.alice.displayed_fingerprint("bob", channel);
      return Cell{property, profile.name, "pass", "event:0"};
    } catch (const Unsupported&) {
      return Cell{property, profile.name, "fail", "error:Unsupported"};
    }
  };
  report.cells.push_back(channel_cell("qr", VerifyChannel::kQr));
  report.cells.push_back(channel_cell("export", VerifyChannel::kExported));

  auto fp_bob = lab.bob.displayed_fingerprint("alice", VerifyChannel::kInPerson);
  lab.alice.verify_peer("bob", VerifyChannel::kInPerson, fp_bob.raw);
  try {
    bool v = lab.alice.is_verified("bob");
    finish(report, lab);
    report.cells.push_back(
        Cell{"verified-check", profile.name, v ? "pass" : "fail",
             "event:" + std::to_string(*find_event(report.events, "verified"))});
  } catch (const Unsupported&) {
    finish(report, lab);
    report.cells.push_back(
        Cell{"verified-check", profile.name, "fail", "error:Unsupported"});
  }

  // MITM variant: the attacker substitutes identity keys during bundle
  // fetch; an in-person comparison against the true fingerprint must fail.
  {
    simnet::World w2(seed + 1);
    auto attacker_ik = w2.suite().generate_keypair();
    auto attacker_spk = w2.suite().generate_keypair();
    Bytes spk_sig = w2.suite().sign(
        attacker_ik.priv, crypto::CryptoSuite::encode_element(attacker_spk.pub));
    w2.set_mitm("alice", "bob",
                [=](const std::string&, const std::string&,
                    const std::string& kind, Bytes payload) {
                  if (kind != "bundle") return payload;
                  auto b = x3dh::PrekeyBundle::deserialize(payload);
                  b.ik_pub = attacker_ik.pub;
                  b.spk.pub = attacker_spk.pub;
                  b.spk.signature = spk_sig;
                  b.opk.reset();
                  return b.serialize();
                });
    Client alice2(w2, "alice", profile);
    Client bob2(w2, "bob", profile);
    alice2.start_conversation("bob");
    if (profile.e2e_opt_in) alice2.enable_encryption("bob");
    auto truth = session::compute_fingerprint(
        w2.suite(), alice2.identity_pub(), bob2.identity_pub());
    bool detected = false;
    try {
      alice2.verify_peer("bob", VerifyChannel::kInPerson, truth.raw);
    } catch (const VerificationFailed&) {
      detected = true;
    }
    report.notes.push_back(detected ? "mitm-detected:VerificationFailed"
                                    : "mitm-missed");
  }
  return report;
}

ScenarioReport run_other_security(const PolicyProfile& profile,
                                  std::uint64_t seed) {
  ScenarioReport report = make_report("other-security", profile.name);
  Lab lab(profile, seed);
  lab.handshake();

  if (profile.clear_trusted_contacts) {
    auto fp_bob =
        lab.bob.displayed_fingerprint("alice", VerifyChannel::kInPerson);
    lab.alice.verify_peer("bob", VerifyChannel::kInPerson, fp_bob.raw);
    bool before = lab.alice.is_verified("bob");
    lab.alice.clear_trusted();
    bool after = lab.alice.is_verified("bob");
    finish(report, lab);
    report.cells.push_back(Cell{
        "clear-trusted", profile.name, (before && !after) ? "pass" : "fail",
        "event:" +
            std::to_string(*find_event(report.events, "trusted_cleared"))});
  } else {
    try {
      lab.alice.clear_trusted();
    } catch (const Unsupported&) {
    }
    finish(report, lab);
    report.cells.push_back(
        Cell{"clear-trusted", profile.name, "fail", "error:Unsupported"});
  }

  auto static_note = [&](const char* name, bool v) {
    report.notes.push_back(std::string("static:") + name + "=" +
                           (v ? "on" : "off") + " (not executable)");
  };
  static_note("two_step_verification", profile.two_step_verification);
  static_note("passphrase_lock", profile.passphrase_lock);
  static_note("screen_security", profile.screen_security);
  return report;
}

std::size_t oracle_decrypt_count(const crypto::CryptoSuite& suite,
                                 const std::vector<ratchet::RatchetState>& states,
                                 const std::vector<ratchet::Envelope>& envelopes,
                                 std::size_t depth) {
  std::vector<Bytes> candidates;
  for (const auto& state : states) {
    for (const auto& [key, mk] : state.skipped) candidates.push_back(mk);
    for (const auto& chain : {state.cks, state.ckr}) {
      if (!chain) continue;
      Bytes ck = *chain;
      for (std::size_t i = 0; i <= depth; ++i) {
        auto [next, mk] = suite.kdf_ck(ck);
        candidates.push_back(mk);
        ck = next;
      }
    }
  }
  std::size_t decrypted = 0;
  for (const auto& env : envelopes) {
    Bytes ad = ratchet_ad(env.header);
    for (const auto& mk : candidates) {
      try {
        suite.aead_decrypt(mk, env.ciphertext, ad);
        decrypted += 1;
        break;
      } catch (const AuthenticationFailure&) {
      }
    }
  }
  return decrypted;
}

namespace {

struct DirectPair {
  crypto::CryptoSuite suite;
  ratchet::RatchetState a, b;

  explicit DirectPair(std::uint64_t seed)
      : suite(concat({to_bytes("pair-"), be64(seed)})) {
    Bytes sk = suite.random_bytes(32);
    crypto::KeyPair bob_kp = suite.generate_keypair();
    a = ratchet::init_initiator(suite, sk, bob_kp.pub);
    b = ratchet::init_responder(sk, bob_kp);
  }

  ratchet::Envelope send_a(const std::string& text) {
    auto [next, env] = ratchet::ratchet_encrypt(suite, a, to_bytes(text), {});
    a = std::move(next);
    return env;
  }
  ratchet::Envelope send_b(const std::string& text) {
    auto [next, env] = ratchet::ratchet_encrypt(suite, b, to_bytes(text), {});
    b = std::move(next);
    return env;
  }
  Bytes recv_a(const ratchet::Envelope& env) {
    auto [next, pt] = ratchet::ratchet_decrypt(suite, a, env, {});
    a = std::move(next);
    return pt;
  }
  Bytes recv_b(const ratchet::Envelope& env) {
    auto [next, pt] = ratchet::ratchet_decrypt(suite, b, env, {});
    b = std::move(next);
    return pt;
  }
};

ScenarioReport protocol_properties_signal(std::uint64_t seed) {
  ScenarioReport report = make_report("protocol-properties", "signal-like");
  auto pass = [&](const std::string& property, const std::string& evidence) {
    report.cells.push_back(Cell{property, "signal-like", "pass", evidence});
  };
  auto fail = [&](const std::string& property, const std::string& evidence) {
    report.cells.push_back(Cell{property, "signal-like", "fail", evidence});
  };

  {  // asynchronicity: queued envelope reaches a peer who comes back online
    Lab lab(session::builtin_profile("signal-like"), seed);
    lab.start_pair();
    lab.world.set_online("bob", false);
    lab.alice.send_text("bob", "while you were out");
    lab.world.tick(3);
    lab.world.set_online("bob", true);
    lab.world.tick();
    lab.bob.poll();
    if (lab.bob.inbox().size() == 1) {
      std::size_t i = lab.world.log().size() - 1;  // the deliver entry
      pass("asynchronicity", "log:" + std::to_string(i));
    } else {
      fail("asynchronicity", "absent:deliver");
    }
    report.net_log = render_net_log(lab.world);
  }

  {  // out-of-order: B1, B4, B2, B3 all decrypt
    DirectPair pair(seed);
    pair.recv_b(pair.send_a("A1"));
    auto b1 = pair.send_b("B1");
    auto b2 = pair.send_b("B2");
    auto b3 = pair.send_b("B3");
    auto b4 = pair.send_b("B4");
    bool ok = pair.recv_a(b1) == to_bytes("B1") &&
              pair.recv_a(b4) == to_bytes("B4") &&
              pair.recv_a(b2) == to_bytes("B2") &&
              pair.recv_a(b3) == to_bytes("B3");
    ok ? pass("out-of-order", "event:0") : fail("out-of-order", "event:0");
  }

  {  // dropped message: later traffic keeps decrypting
    DirectPair pair(seed + 1);
    bool ok = true;
    for (int i = 0; i < 10; ++i) {
      auto env = pair.send_a("m" + std::to_string(i));
      if (i == 5) continue;  // lost in transit
      ok = ok && pair.recv_b(env) == to_bytes("m" + std::to_string(i));
    }
    ok ? pass("dropped-message", "event:0") : fail("dropped-message", "event:0");
  }

  {  // forward secrecy: full final-state compromise opens no past envelope
    DirectPair pair(seed + 2);
    std::vector<ratchet::Envelope> envelopes;
    for (int i = 0; i < 10; ++i) {
      auto ea = pair.send_a("a" + std::to_string(i));
      envelopes.push_back(ea);
      pair.recv_b(ea);
      auto eb = pair.send_b("b" + std::to_string(i));
      envelopes.push_back(eb);
      pair.recv_a(eb);
    }
    std::size_t n =
        oracle_decrypt_count(pair.suite, {pair.a, pair.b}, envelopes);
    n == 0 ? pass("forward-secrecy", "event:0")
           : fail("forward-secrecy", "event:0");
  }

  {  // break-in recovery: cloned state is useless after one round-trip
    DirectPair pair(seed + 3);
    for (int i = 0; i < 6; ++i) {
      pair.recv_b(pair.send_a("x"));
      pair.recv_a(pair.send_b("y"));
    }
    ratchet::RatchetState stolen_a = pair.a, stolen_b = pair.b;
    pair.recv_b(pair.send_a("round"));  // honest round-trip
    pair.recv_a(pair.send_b("trip"));
    std::vector<ratchet::Envelope> after;
    for (int i = 0; i < 6; ++i) {
      auto ea = pair.send_a("p" + std::to_string(i));
      after.push_back(ea);
      pair.recv_b(ea);
      auto eb = pair.send_b("q" + std::to_string(i));
      after.push_back(eb);
      pair.recv_a(eb);
    }
    std::size_t n =
        oracle_decrypt_count(pair.suite, {stolen_a, stolen_b}, after);
    n == 0 ? pass("break-in-recovery", "event:0")
           : fail("break-in-recovery", "event:0");
  }

  return report;
}

ScenarioReport protocol_properties_otr(std::uint64_t seed) {
  ScenarioReport report = make_report("protocol-properties", "otr");
  auto judge = [&](const std::string& property, bool ok,
                   const std::string& evidence) {
    report.cells.push_back(
        Cell{property, "otr", ok ? "pass" : "fail", evidence});
  };

  {  // no asynchronicity: sending to an offline peer is refused
    Lab lab(session::builtin_profile("signal-like"), seed, Protocol::kOtr);
    Client::establish_otr(lab.alice, lab.bob);
    lab.world.set_online("bob", false);
    bool refused = false;
    try {
      lab.alice.send_text("bob", "anyone there?");
    } catch (const PeerOffline&) {
      refused = true;
    }
    judge("asynchronicity-refusal", refused, "error:PeerOffline");
    report.net_log = render_net_log(lab.world);
  }

  crypto::CryptoSuite suite(concat({to_bytes("otr-props-"), be64(seed)}));
  otr::OtrIdentity ida{"alice", suite.generate_keypair()};
  otr::OtrIdentity idb{"bob", suite.generate_keypair()};
  auto [sessions, transcript] = otr::ake_sigma_r(suite, ida, idb);
  auto [a, b] = sessions;

  auto exchange = [&](otr::OtrSession& s, otr::OtrSession& r,
                      const std::string& text) {
    auto [s2, m] = otr::otr_send(suite, s, to_bytes(text));
    s = std::move(s2);
    auto [r2, pt] = otr::otr_receive(suite, r, m);
    r = std::move(r2);
    return m;
  };
  exchange(a, b, "one");
  exchange(b, a, "two");
  Bytes old_mk = a.mk;
  Bytes old_ss = a.ss;
  otr::rekey(suite, a, b);

  judge("forward-secrecy",
        !contains_bytes(a.serialize_secrets(), old_ss) &&
            !contains_bytes(b.serialize_secrets(), old_ss),
        "event:0");

  auto published = exchange(a, b, "three");  // carries the retired MAC key
  bool forged_ok = false;
  if (!published.published_mks.empty()) {
    auto forged = otr::forge_message(suite, b.published_mks, old_mk,
                                     otr::ForgeMode::kWholeMessage,
                                     to_bytes("i never said this"), published);
    forged_ok = suite.verify_mac(old_mk, forged.ciphertext, forged.tag);
  }
  judge("deniability-forgery", forged_ok, "event:0");

  {  // SMP catches a MITM with mismatched session secrets on the two legs
    otr::OtrIdentity mallory{"mallory", suite.generate_keypair()};
    auto [leg1, t1] = otr::ake_sigma_r(suite, ida, mallory);
    auto [leg2, t2] = otr::ake_sigma_r(suite, mallory, idb);
    auto smp = otr::smp_run(suite, leg1.first, to_bytes("our secret"),
                            leg2.second, to_bytes("our secret"));
    judge("smp-mitm-detection", !smp.equal, "event:0");
  }

  return report;
}

}  // namespace

ScenarioReport run_protocol_properties(Protocol protocol, std::uint64_t seed) {
  return protocol == Protocol::kOtr ? protocol_properties_otr(seed)
                                    : protocol_properties_signal(seed);
}

std::vector<std::string> scenario_names() {
  return {"initial-setup",       "key-change", "key-change-in-transit",
          "verification",        "other-security",
          "protocol-properties", "otr-transcript"};
}

ScenarioReport run_scenario(const std::string& name,
                            const PolicyProfile& profile, std::uint64_t seed) {
  if (name == "initial-setup") return run_initial_setup(profile, seed);
  if (name == "key-change") return run_key_change(profile, seed);
  if (name == "key-change-in-transit")
    return run_key_change_in_transit(profile, seed);
  if (name == "verification") return run_verification(profile, seed);
  if (name == "other-security") return run_other_security(profile, seed);
  if (name == "protocol-properties") {
    ScenarioReport signal = run_protocol_properties(Protocol::kSignalLike, seed);
    ScenarioReport otr = run_protocol_properties(Protocol::kOtr, seed);
    signal.profile = "signal-like+otr";
    for (auto& c : otr.cells) signal.cells.push_back(std::move(c));
    for (auto& n : otr.notes) signal.notes.push_back(std::move(n));
    return signal;
  }
  if (name == "otr-transcript") {
    ScenarioReport report = make_report("otr-transcript", "otr");
    std::istringstream in(make_otr_transcript(seed));
    std::string line;
    while (std::getline(in, line)) report.notes.push_back(line);
    return report;
  }
  throw Unsupported("unknown scenario: " + name);
}

PropertyMatrix build_matrix(const std::vector<PolicyProfile>& profiles,
                            std::uint64_t seed) {
  PropertyMatrix matrix;
  for (const auto* p : kProperties) matrix.properties.push_back(p);
  matrix.properties.push_back("verify-by-call");
  for (const auto& profile : profiles) {
    matrix.profiles.push_back(profile.name);
    ScenarioReport reports[] = {
        run_initial_setup(profile, seed),
        run_key_change(profile, seed),
        run_key_change_in_transit(profile, seed),
        run_verification(profile, seed),
        run_other_security(profile, seed),
    };
    for (const auto& report : reports)
      for (const auto& cell : report.cells) matrix.cells.push_back(cell);
    // Voice comparison is outside protocol observability; never judged.
    matrix.cells.push_back(
        Cell{"verify-by-call", profile.name, "n/a", "not-observable"});
  }
  return matrix;
}

std::string expected_matrix_fixture() {
  return "profiles signal-like whatsapp-like wire-like viber-like riot-like "
         "telegram-like\n"
         "tofu pass pass fail fail fail fail\n"
         "e2e-banner fail pass fail fail pass pass\n"
         "key-change-notification pass pass fail fail pass fail\n"
         "blocking pass fail fail fail fail fail\n"
         "reencrypt-resend fail pass fail fail fail fail\n"
         "transmission-details pass pass pass fail pass pass\n"
         "qr pass pass fail fail fail pass\n"
         "export pass pass fail fail fail fail\n"
         "verified-check fail fail pass pass pass fail\n"
         "clear-trusted fail fail fail pass fail fail\n";
}

MatrixComparison compare_matrix(const PropertyMatrix& matrix,
                                std::string_view fixture_text) {
  MatrixComparison cmp;
  std::istringstream in{std::string(fixture_text)};
  std::string line;
  std::vector<std::string> profiles;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "profiles") {
      std::string p;
      while (ls >> p) profiles.push_back(p);
      continue;
    }
    for (const auto& profile : profiles) {
      std::string expected;
      if (!(ls >> expected)) {
        cmp.mismatches.push_back(head + ": fixture row too short");
        break;
      }
      const Cell* cell = matrix.find(head, profile);
      std::string got = cell ? cell->outcome : "missing";
      if (got != expected)
        cmp.mismatches.push_back(head + "/" + profile + ": expected " +
                                 expected + " got " + got);
    }
  }
  cmp.match = cmp.mismatches.empty();
  return cmp;
}

std::string make_otr_transcript(std::uint64_t seed) {
  crypto::CryptoSuite suite(concat({to_bytes("otr-transcript-"), be64(seed)}));
  otr::OtrIdentity ida{"alice", suite.generate_keypair()};
  otr::OtrIdentity idb{"bob", suite.generate_keypair()};
  auto [sessions, transcript] = otr::ake_sigma_r(suite, ida, idb);
  auto [a, b] = sessions;

  std::vector<otr::OtrMessage> messages;
  auto exchange = [&](otr::OtrSession& s, otr::OtrSession& r,
                      const std::string& text) {
    auto [s2, m] = otr::otr_send(suite, s, to_bytes(text));
    s = std::move(s2);
    auto [r2, pt] = otr::otr_receive(suite, r, m);
    r = std::move(r2);
    messages.push_back(std::move(m));
  };
  exchange(a, b, "remember the plan?");
  exchange(b, a, "which plan?");
  otr::rekey(suite, a, b);
  exchange(a, b, "the one from tuesday");
  {  // final message flushes bob's pending publication
    auto [b2, fin] = otr::otr_shutdown(suite, b);
    b = std::move(b2);
    auto [a2, pt] = otr::otr_receive(suite, a, fin);
    a = std::move(a2);
    messages.push_back(std::move(fin));
  }

  std::ostringstream out;
  std::vector<Bytes> published = a.published_mks;
  for (const auto& mk : b.published_mks)
    if (std::find(published.begin(), published.end(), mk) == published.end())
      published.push_back(mk);
  for (const auto& mk : published) out << "mk=" << hex_encode(mk) << '\n';
  for (const auto& m : messages)
    out << "msg=" << hex_encode(m.serialize()) << '\n';
  return out.str();
}

ForgeDemo forge_from_transcript(const crypto::CryptoSuite& suite,
                                std::string_view transcript, ByteSpan payload,
                                otr::ForgeMode mode) {
  std::vector<Bytes> mks;
  std::vector<otr::OtrMessage> messages;
  std::istringstream in{std::string(transcript)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("mk=", 0) == 0)
      mks.push_back(hex_decode(line.substr(3)));
    else if (line.rfind("msg=", 0) == 0)
      messages.push_back(otr::OtrMessage::deserialize(hex_decode(line.substr(4))));
  }
  if (mks.empty())
    throw RefusesToForgeUnpublished("transcript published no MAC keys");
  if (messages.empty())
    throw ProtocolViolation("transcript has no reference message");
  ForgeDemo demo;
  demo.mk = mks.front();
  demo.forged =
      otr::forge_message(suite, mks, demo.mk, mode, payload, messages.back());
  demo.verifies =
      suite.verify_mac(demo.mk, demo.forged.ciphertext, demo.forged.tag);
  return demo;
}

}  // namespace msglab::scenarios
