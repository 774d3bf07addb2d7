#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msglab/session.hpp"
#include "support.hpp"

using namespace msglab;
using namespace msglab::session;

namespace {

struct Duo {
  simnet::World world;
  Client alice, bob;

  explicit Duo(const std::string& profile_name, std::uint64_t seed = 11,
               Protocol protocol = Protocol::kSignalLike)
      : world(seed),
        alice(world, "alice", builtin_profile(profile_name), protocol),
        bob(world, "bob", builtin_profile(profile_name), protocol) {}

  void settle(int rounds = 4) {
    for (int i = 0; i < rounds; ++i) {
      world.tick();
      if (world.online("alice")) alice.poll();
      if (world.online("bob")) bob.poll();
    }
  }

  void open() {
    alice.start_conversation("bob");
    if (alice.profile().e2e_opt_in) alice.enable_encryption("bob");
  }
};

bool has_event(const Client& c, const std::string& kind) {
  for (const auto& e : c.events())
    if (e.kind == kind) return true;
  return false;
}

}  // namespace

TEST_CASE("profile validation") {
  for (const auto& name : builtin_profile_names())
    CHECK_NOTHROW(builtin_profile(name).validate());
  CHECK_THROWS_AS(builtin_profile("matrix-like"), BadProfile);

  PolicyProfile bad = builtin_profile("whatsapp-like");
  bad.per_message_status = StatusDetail::kLastOnly;
  CHECK_THROWS_AS(bad.validate(), BadProfile);

  PolicyProfile irr = builtin_profile("signal-like");
  irr.encryption_irreversible = true;  // without opt-in
  CHECK_THROWS_AS(irr.validate(), BadProfile);
}

TEST_CASE("profile config round-trip and shipped files match built-ins") {
  for (const auto& name : builtin_profile_names()) {
    PolicyProfile p = builtin_profile(name);
    CHECK(render_profile(parse_profile(render_profile(p))) ==
          render_profile(p));
    PolicyProfile from_file = parse_profile(
        testsupport::read_file(testsupport::profile_path(name + ".profile")));
    CHECK(render_profile(from_file) == render_profile(p));
  }
  CHECK_THROWS_AS(parse_profile("profile x\nwarp_drive on\n"), BadProfile);
  CHECK_THROWS_AS(parse_profile("tofu on\n"), BadProfile);  // unnamed
}

TEST_CASE("fingerprints are symmetric and key-sensitive") {
  crypto::CryptoSuite suite(to_bytes("fp"));
  auto a = suite.generate_keypair(), b = suite.generate_keypair();
  auto fp1 = compute_fingerprint(suite, a.pub, b.pub);
  auto fp2 = compute_fingerprint(suite, b.pub, a.pub);
  CHECK(fp1.raw == fp2.raw);
  CHECK(fp1.digits == fp2.digits);
  CHECK(fp1.digits.size() == 60 + 11);  // 12 groups of 5, space-separated
  CHECK(fp1.qr_payload.size() == fp1.raw.size() + 1);
  auto c = suite.generate_keypair();
  CHECK(compute_fingerprint(suite, a.pub, c.pub).raw != fp1.raw);
}

TEST_CASE("duplicate user name is rejected") {
  simnet::World w(1);
  Client a(w, "alice", builtin_profile("signal-like"));
  CHECK(w.has_actor(a.user()));
  CHECK_THROWS_AS(Client(w, "alice", builtin_profile("signal-like")),
                  DuplicateUser);
}

TEST_CASE("text round-trip through x3dh and the ratchet") {
  Duo duo("signal-like");
  duo.open();
  duo.alice.send_text("bob", "first");
  duo.settle();
  duo.bob.send_text("alice", "second");
  duo.settle();
  REQUIRE(duo.bob.inbox().size() == 1);
  CHECK(duo.bob.inbox()[0].second == "first");
  REQUIRE(duo.alice.inbox().size() == 1);
  CHECK(duo.alice.inbox()[0].second == "second");
  CHECK(has_event(duo.alice, "tofu_trusted"));
}

TEST_CASE("statuses move from sent to delivered") {
  Duo duo("signal-like");
  duo.open();
  auto id = duo.alice.send_text("bob", "track me");
  CHECK(duo.alice.message_status(id) == MsgStatus::kSent);
  duo.settle();
  CHECK(duo.alice.message_status(id) == MsgStatus::kDelivered);
  CHECK_THROWS_AS(duo.alice.message_status(9999), NotTracked);
}

TEST_CASE("viber-like tracks only the newest message") {
  Duo duo("viber-like");
  duo.open();
  auto m1 = duo.alice.send_text("bob", "one");
  duo.settle();
  auto m2 = duo.alice.send_text("bob", "two");
  duo.settle();
  CHECK(duo.alice.message_status(m2) == MsgStatus::kDelivered);
  CHECK_THROWS_AS(duo.alice.message_status(m1), NotTracked);
}

TEST_CASE("signal-like: deferred notification, blocking, verify unblocks") {
  Duo duo("signal-like");
  duo.open();
  duo.alice.send_text("bob", "hello");
  duo.settle();
  duo.bob.reinstall();
  duo.settle(2);
  CHECK(!has_event(duo.alice, "key_changed"));  // deferred until a send
  auto blocked = duo.alice.send_text("bob", "held back");
  CHECK(has_event(duo.alice, "key_changed"));
  CHECK(has_event(duo.alice, "message_blocked"));
  CHECK(duo.alice.message_status(blocked) == MsgStatus::kBlocked);
  std::size_t sends_before = 0;
  for (const auto& e : duo.world.log())
    if (e.event == "send" && e.kind == "msg" && e.recipient == "bob")
      ++sends_before;

  // bob's trust store was wiped by the reinstall; compare against the
  // ground-truth fingerprint of both current identities instead
  auto truth = compute_fingerprint(duo.world.suite(), duo.alice.identity_pub(),
                                   duo.bob.identity_pub());
  duo.alice.verify_peer("bob", VerifyChannel::kInPerson, truth.raw);
  duo.settle();
  CHECK(duo.alice.message_status(blocked) == MsgStatus::kDelivered);
  std::size_t sends_after = 0;
  for (const auto& e : duo.world.log())
    if (e.event == "send" && e.kind == "msg" && e.recipient == "bob")
      ++sends_after;
  CHECK(sends_after == sends_before + 1);
  REQUIRE(duo.bob.inbox().size() == 2);  // history survives the reinstall
  CHECK(duo.bob.inbox()[1].second == "held back");
}

TEST_CASE("whatsapp-like: immediate notification and re-encrypt-resend") {
  Duo duo("whatsapp-like");
  duo.open();
  duo.alice.send_text("bob", "hello");
  duo.settle();
  duo.world.set_online("bob", false);
  auto lost = duo.alice.send_text("bob", "catch this");
  duo.bob.reinstall();
  duo.world.set_online("bob", true);
  duo.settle(6);
  CHECK(has_event(duo.alice, "key_changed"));
  CHECK(has_event(duo.alice, "resent"));
  CHECK(duo.alice.message_status(lost) == MsgStatus::kDelivered);
  REQUIRE(duo.bob.inbox().size() == 2);  // "hello" survives, resend arrives
  CHECK(duo.bob.inbox()[1].second == "catch this");
}

TEST_CASE("telegram-like: key change kills the session") {
  Duo duo("telegram-like");
  duo.open();
  duo.alice.send_text("bob", "secret chat");
  duo.settle();
  duo.bob.reinstall();
  duo.settle(2);
  CHECK_THROWS_AS(duo.alice.send_text("bob", "still there?"), SessionDead);
}

TEST_CASE("riot-like: encryption cannot be disabled; history locked to keys") {
  Duo duo("riot-like");
  duo.alice.start_conversation("bob");
  CHECK(!has_event(duo.alice, "e2e_banner"));  // opt-in: no banner yet
  duo.alice.enable_encryption("bob");
  CHECK(has_event(duo.alice, "e2e_banner"));
  CHECK_NOTHROW(duo.alice.enable_encryption("bob"));  // idempotent
  CHECK_THROWS_AS(duo.alice.disable_encryption("bob"), Irreversible);

  duo.alice.send_text("bob", "before the wipe");
  duo.settle();
  CHECK(duo.bob.inbox().size() == 1);
  duo.bob.reinstall();
  CHECK(duo.bob.inbox().empty());  // new keys cannot read prior messages
}

TEST_CASE("always-encrypted profiles reject the opt-in toggles") {
  Duo duo("signal-like");
  duo.open();
  CHECK_THROWS_AS(duo.alice.enable_encryption("bob"), AlreadyEncrypted);
  CHECK_THROWS_AS(duo.alice.disable_encryption("bob"), AlreadyEncrypted);
}

TEST_CASE("wire-like asks for verification and supports the verified check") {
  Duo duo("wire-like");
  duo.open();
  CHECK(has_event(duo.alice, "verification_required"));
  duo.alice.send_text("bob", "hi");
  duo.settle();
  CHECK(!duo.alice.is_verified("bob"));
  auto fp = duo.bob.displayed_fingerprint("alice", VerifyChannel::kInPerson);
  duo.alice.verify_peer("bob", VerifyChannel::kInPerson, fp.raw);
  CHECK(duo.alice.is_verified("bob"));
  duo.bob.reinstall();
  duo.settle(2);
  CHECK(!duo.alice.is_verified("bob"));  // key change resets the flag
}

TEST_CASE("verification channels honor profile capabilities") {
  Duo duo("viber-like");
  duo.open();
  duo.alice.send_text("bob", "hi");
  duo.settle();
  CHECK_THROWS_AS(duo.alice.displayed_fingerprint("bob", VerifyChannel::kQr),
                  Unsupported);
  CHECK_THROWS_AS(
      duo.alice.displayed_fingerprint("bob", VerifyChannel::kExported),
      Unsupported);
  CHECK_NOTHROW(duo.alice.displayed_fingerprint("bob", VerifyChannel::kInPerson));
}

TEST_CASE("mismatched fingerprints fail verification") {
  Duo duo("signal-like");
  duo.open();
  duo.alice.send_text("bob", "hi");
  duo.settle();
  Bytes wrong(32, 0xab);
  CHECK_THROWS_AS(
      duo.alice.verify_peer("bob", VerifyChannel::kInPerson, wrong),
      VerificationFailed);
}

TEST_CASE("clear trusted contacts") {
  Duo duo("viber-like");
  duo.open();
  duo.alice.send_text("bob", "hi");
  duo.settle();
  auto fp = duo.bob.displayed_fingerprint("alice", VerifyChannel::kInPerson);
  duo.alice.verify_peer("bob", VerifyChannel::kInPerson, fp.raw);
  CHECK(duo.alice.is_verified("bob"));
  duo.alice.clear_trusted();
  CHECK(!duo.alice.is_verified("bob"));

  Duo other("signal-like", 12);
  CHECK_THROWS_AS(other.alice.clear_trusted(), Unsupported);
}

TEST_CASE("otr clients refuse offline peers and otherwise round-trip") {
  Duo duo("signal-like", 13, Protocol::kOtr);
  Client::establish_otr(duo.alice, duo.bob);
  duo.alice.send_text("bob", "otr hello");
  duo.settle();
  REQUIRE(duo.bob.inbox().size() == 1);
  CHECK(duo.bob.inbox()[0].second == "otr hello");
  duo.world.set_online("bob", false);
  CHECK_THROWS_AS(duo.alice.send_text("bob", "gone"), PeerOffline);
}

TEST_CASE("event sequences are deterministic") {
  auto run = [](std::uint64_t seed) {
    Duo duo("whatsapp-like", seed);
    duo.open();
    duo.alice.send_text("bob", "hello");
    duo.settle();
    duo.bob.reinstall();
    duo.settle();
    duo.alice.send_text("bob", "again");
    duo.settle();
    std::string out;
    for (const auto& e : duo.alice.events())
      out += std::to_string(e.tick) + "|" + e.kind + "|" + e.peer + "|" +
             e.detail + "\n";
    return out;
  };
  CHECK(run(77) == run(77));
}

TEST_CASE("unknown peers are rejected") {
  Duo duo("signal-like");
  CHECK_THROWS_AS(duo.alice.start_conversation("carol"), NoSuchUser);
}
