#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msglab/otr.hpp"

using namespace msglab;
using namespace msglab::crypto;
using namespace msglab::otr;

namespace {

struct Fixture {
  CryptoSuite suite;
  OtrIdentity alice, bob;

  explicit Fixture(const std::string& seed) : suite(to_bytes(seed)) {
    alice = OtrIdentity{"alice", suite.generate_keypair()};
    bob = OtrIdentity{"bob", suite.generate_keypair()};
  }

  std::pair<OtrSession, OtrSession> ake() {
    auto [sessions, transcript] = ake_sigma_r(suite, alice, bob);
    return sessions;
  }

  OtrMessage exchange(OtrSession& s, OtrSession& r, const std::string& text) {
    auto [s2, m] = otr_send(suite, s, to_bytes(text));
    s = std::move(s2);
    auto [r2, pt] = otr_receive(suite, r, m);
    r = std::move(r2);
    CHECK(pt == to_bytes(text));
    return m;
  }
};

}  // namespace

TEST_CASE("honest key exchange agrees on the shared secret") {
  Fixture f("ake");
  auto [sessions, transcript] = ake_sigma_r(f.suite, f.alice, f.bob);
  CHECK(transcript.messages.size() == 4);
  CHECK(sessions.first.established);
  CHECK(sessions.second.established);
  CHECK(sessions.first.ss == sessions.second.ss);
  CHECK(sessions.first.peer_longterm_pub == f.bob.longterm.pub);
  CHECK(sessions.second.peer_longterm_pub == f.alice.longterm.pub);
}

TEST_CASE("any substitution in the exchange fails authentication") {
  for (int target = 1; target <= 4; ++target) {
    Fixture f("ake-tamper-" + std::to_string(target));
    KeyPair fake = f.suite.generate_keypair();
    auto tamper = [&](int index, Bytes wire) {
      if (index != target) return wire;
      if (index <= 2) return CryptoSuite::encode_element(fake.pub);
      wire[0] ^= 1;
      return wire;
    };
    CHECK_THROWS_AS(ake_sigma_r(f.suite, f.alice, f.bob, tamper), AkeFailed);
  }
}

TEST_CASE("transport round-trips and rejects a wrong MAC") {
  Fixture f("transport");
  auto [a, b] = f.ake();
  f.exchange(a, b, "hello bob");
  f.exchange(b, a, "hello alice");

  auto [a2, m] = otr_send(f.suite, a, to_bytes("tampered"));
  m.ciphertext[0] ^= 1;
  CHECK_THROWS_AS(otr_receive(f.suite, b, m), AuthenticationFailure);

  OtrSession fresh;
  CHECK_THROWS_AS(otr_send(f.suite, fresh, to_bytes("x")), NotEstablished);
}

TEST_CASE("after k re-keys exactly k MAC keys are published") {
  Fixture f("publication");
  auto [a, b] = f.ake();
  const int k = 5;
  for (int i = 0; i < k; ++i) {
    f.exchange(a, b, "ping " + std::to_string(i));
    f.exchange(b, a, "pong " + std::to_string(i));
    rekey(f.suite, a, b);
    // the first message after the re-key carries the retired key
    auto m = f.exchange(a, b, "fresh " + std::to_string(i));
    CHECK(m.published_mks.size() == 1);
  }
  // the re-key is joint, so both sides see the same k distinct keys
  CHECK(a.published_mks.size() == static_cast<std::size_t>(k));
  // b's final unflushed copy goes out with a shutdown message
  CHECK(b.to_publish.size() == 1);
  auto [b2, fin] = otr_shutdown(f.suite, b);
  CHECK(fin.published_mks.size() == 1);
  CHECK(b2.to_publish.empty());
  CHECK(b2.published_mks.size() == static_cast<std::size_t>(k));
}

TEST_CASE("re-key erases the old secrets") {
  Fixture f("rekey-erase");
  auto [a, b] = f.ake();
  Bytes old_ss = a.ss, old_ek = a.ek, old_mk = a.mk;
  rekey(f.suite, a, b);
  CHECK(a.ss != old_ss);
  for (const OtrSession* s : {&a, &b}) {
    Bytes secrets = s->serialize_secrets();
    CHECK(!contains_bytes(secrets, old_ss));
    CHECK(!contains_bytes(secrets, old_ek));
  }
  // the old MAC key survives only in the publication queues
  CHECK(a.to_publish.front() == old_mk);
  CHECK(a.retired_mks.front() == old_mk);
}

TEST_CASE("messages under a published key are rejected as forgeable") {
  Fixture f("retired");
  auto [a, b] = f.ake();
  f.exchange(a, b, "one");
  Bytes old_mk = a.mk;
  Bytes old_ek = a.ek;
  rekey(f.suite, a, b);
  f.exchange(a, b, "two");  // publishes old_mk

  // a third party crafts a message under the now-public MAC key
  OtrMessage forged;
  forged.counter = 99;
  forged.ciphertext = f.suite.stream_encrypt(old_ek, 99, to_bytes("planted"));
  forged.tag = f.suite.mac(old_mk, forged.ciphertext);
  CHECK_THROWS_AS(otr_receive(f.suite, b, forged), ForgedUnderPublishedKey);
}

TEST_CASE("forgery succeeds only with published keys") {
  Fixture f("forge");
  auto [a, b] = f.ake();
  auto reference = f.exchange(a, b, "the original message");
  Bytes old_mk = a.mk;
  rekey(f.suite, a, b);
  f.exchange(a, b, "next");  // b now knows old_mk was published

  auto whole = forge_message(f.suite, b.published_mks, old_mk,
                             ForgeMode::kWholeMessage,
                             to_bytes("completely invented"), reference);
  CHECK(f.suite.verify_mac(old_mk, whole.ciphertext, whole.tag));
  CHECK(whole.ciphertext == to_bytes("completely invented"));

  Bytes delta(reference.ciphertext.size(), 0);
  delta[0] = 'T' ^ 't';
  auto flipped = forge_message(f.suite, b.published_mks, old_mk,
                               ForgeMode::kXorDelta, delta, reference);
  CHECK(f.suite.verify_mac(old_mk, flipped.ciphertext, flipped.tag));
  CHECK(flipped.ciphertext != reference.ciphertext);

  // current MAC key was never published: refuse
  CHECK_THROWS_AS(forge_message(f.suite, b.published_mks, a.mk,
                                ForgeMode::kWholeMessage, to_bytes("x"),
                                reference),
                  RefusesToForgeUnpublished);
}

TEST_CASE("smp agrees on equality and inequality") {
  Fixture f("smp");
  auto [a, b] = f.ake();
  auto equal = smp_run(f.suite, a, to_bytes("red fox"), b, to_bytes("red fox"));
  CHECK(equal.messages.size() == 4);
  CHECK(equal.equal);
  auto unequal =
      smp_run(f.suite, a, to_bytes("red fox"), b, to_bytes("red sox"));
  CHECK(!unequal.equal);
}

TEST_CASE("smp detects a mitm with mismatched session secrets") {
  Fixture f("smp-mitm");
  OtrIdentity mallory{"mallory", f.suite.generate_keypair()};
  auto [leg1, t1] = ake_sigma_r(f.suite, f.alice, mallory);
  auto [leg2, t2] = ake_sigma_r(f.suite, mallory, f.bob);
  // both honest parties use the same secret, but the legs disagree on ss
  auto smp = smp_run(f.suite, leg1.first, to_bytes("shared secret"),
                     leg2.second, to_bytes("shared secret"));
  CHECK(!smp.equal);
}

TEST_CASE("otr message wire round-trip") {
  Fixture f("wire");
  auto [a, b] = f.ake();
  f.exchange(a, b, "one");
  rekey(f.suite, a, b);
  auto [a2, m] = otr_send(f.suite, a, to_bytes("with publication"));
  auto back = OtrMessage::deserialize(m.serialize());
  CHECK(back.counter == m.counter);
  CHECK(back.ciphertext == m.ciphertext);
  CHECK(back.tag == m.tag);
  CHECK(back.published_mks == m.published_mks);
  CHECK(back.next_dh == m.next_dh);
}
