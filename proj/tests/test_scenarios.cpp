#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "msglab/scenarios.hpp"
#include "support.hpp"

using namespace msglab;
using namespace msglab::scenarios;
using session::builtin_profile;
using session::builtin_profile_names;

namespace {

std::vector<session::PolicyProfile> all_builtins() {
  std::vector<session::PolicyProfile> out;
  for (const auto& name : builtin_profile_names())
    out.push_back(builtin_profile(name));
  return out;
}

}  // namespace

TEST_CASE("matrix over the built-ins reproduces the committed expectations") {
  auto matrix = build_matrix(all_builtins());
  auto cmp = compare_matrix(matrix, expected_matrix_fixture());
  for (const auto& m : cmp.mismatches) MESSAGE(m);
  CHECK(cmp.match);

  // the committed fixture file is the same text the library embeds
  CHECK(testsupport::read_file(testsupport::fixture_path(
            "expected_matrix.txt")) == expected_matrix_fixture());
}

TEST_CASE("matrix shape: 11 properties x 6 profiles, voice check never judged") {
  auto matrix = build_matrix(all_builtins());
  CHECK(matrix.properties.size() == 11);
  CHECK(matrix.profiles.size() == 6);
  CHECK(matrix.cells.size() == 66);
  for (const auto& profile : matrix.profiles) {
    const Cell* c = matrix.find("verify-by-call", profile);
    REQUIRE(c != nullptr);
    CHECK(c->outcome == "n/a");
    CHECK(c->evidence == "not-observable");
  }
  for (const auto& c : matrix.cells)
    CHECK((c.outcome == "pass" || c.outcome == "fail" || c.outcome == "n/a"));
}

TEST_CASE("every event evidence pointer resolves into the report") {
  const char* behavioral[] = {"initial-setup", "key-change",
                              "key-change-in-transit", "verification",
                              "other-security"};
  for (const auto& profile : all_builtins()) {
    for (const char* name : behavioral) {
      auto report = run_scenario(name, profile);
      for (const auto& cell : report.cells) {
        CHECK(!cell.evidence.empty());
        if (cell.evidence.rfind("event:", 0) == 0) {
          std::size_t i = std::stoul(cell.evidence.substr(6));
          CHECK(i < report.events.size());
        } else if (cell.evidence.rfind("log:", 0) == 0) {
          std::size_t i = std::stoul(cell.evidence.substr(4));
          CHECK(i < report.net_log.size());
        }
      }
    }
  }
}

TEST_CASE("comparison enumerates each mismatching cell") {
  auto matrix = build_matrix(all_builtins());
  for (auto& c : matrix.cells) {
    if (c.property == "tofu" && c.profile == "signal-like") c.outcome = "fail";
    if (c.property == "qr" && c.profile == "viber-like") c.outcome = "pass";
  }
  auto cmp = compare_matrix(matrix, expected_matrix_fixture());
  CHECK(!cmp.match);
  REQUIRE(cmp.mismatches.size() == 2);
  CHECK(cmp.mismatches[0] ==
        "tofu/signal-like: expected pass got fail");
  CHECK(cmp.mismatches[1] == "qr/viber-like: expected fail got pass");
}

TEST_CASE("empty profile list builds an empty matrix") {
  auto matrix = build_matrix({});
  CHECK(matrix.profiles.empty());
  CHECK(matrix.cells.empty());
  CHECK(matrix.properties.size() == 11);
}

TEST_CASE("custom profiles get their own judged row") {
  auto custom = session::parse_profile(
      "profile lab-test\n"
      "tofu on\n"
      "qr_fingerprint on\n"
      "verified_check on\n");
  auto matrix = build_matrix({custom});
  const Cell* tofu = matrix.find("tofu", "lab-test");
  REQUIRE(tofu != nullptr);
  CHECK(tofu->outcome == "pass");
  const Cell* qr = matrix.find("qr", "lab-test");
  REQUIRE(qr != nullptr);
  CHECK(qr->outcome == "pass");
  const Cell* block = matrix.find("blocking", "lab-test");
  REQUIRE(block != nullptr);
  CHECK(block->outcome == "fail");
}

TEST_CASE("verification scenario detects a key-substituting link attacker") {
  auto report = run_verification(builtin_profile("signal-like"));
  bool found = false;
  for (const auto& n : report.notes)
    if (n == "mitm-detected:VerificationFailed") found = true;
  CHECK(found);
}

TEST_CASE("protocol properties: signal-like stack passes all five") {
  auto report = run_protocol_properties(Protocol::kSignalLike);
  REQUIRE(report.cells.size() == 5);
  for (const auto& c : report.cells) {
    INFO(c.property);
    CHECK(c.outcome == "pass");
  }
}

TEST_CASE("protocol properties: otr stack passes all four") {
  auto report = run_protocol_properties(Protocol::kOtr);
  REQUIRE(report.cells.size() == 4);
  for (const auto& c : report.cells) {
    INFO(c.property);
    CHECK(c.outcome == "pass");
  }
  const Cell* async = nullptr;
  for (const auto& c : report.cells)
    if (c.property == "asynchronicity-refusal") async = &c;
  REQUIRE(async != nullptr);
  CHECK(async->evidence == "error:PeerOffline");
}

TEST_CASE("merged protocol-properties scenario and the scenario registry") {
  auto names = scenario_names();
  CHECK(names.size() == 7);
  auto merged =
      run_scenario("protocol-properties", builtin_profile("signal-like"));
  CHECK(merged.profile == "signal-like+otr");
  CHECK(merged.cells.size() == 9);
  CHECK_THROWS_AS(
      run_scenario("time-travel", builtin_profile("signal-like")),
      Unsupported);
}

TEST_CASE("oracle positive control: an unread state decrypts pending traffic") {
  crypto::CryptoSuite suite(to_bytes("oracle-control"));
  Bytes sk = suite.random_bytes(32);
  crypto::KeyPair bob_kp = suite.generate_keypair();
  auto a = ratchet::init_initiator(suite, sk, bob_kp.pub);
  auto b = ratchet::init_responder(sk, bob_kp);
  {  // one delivered message gives b a receiving chain
    auto [a2, env] = ratchet::ratchet_encrypt(suite, a, to_bytes("m0"), {});
    a = std::move(a2);
    auto [b2, pt] = ratchet::ratchet_decrypt(suite, b, env, {});
    b = std::move(b2);
  }
  std::vector<ratchet::Envelope> envelopes;
  for (int i = 1; i <= 5; ++i) {
    auto [next, env] =
        ratchet::ratchet_encrypt(suite, a, to_bytes("m" + std::to_string(i)), {});
    a = std::move(next);
    envelopes.push_back(env);
  }
  // b's receiving chain key still derives every pending message key
  CHECK(oracle_decrypt_count(suite, {b}, envelopes, 8) == 5);
}

TEST_CASE("otr transcript forges under a published mac key") {
  crypto::CryptoSuite suite(to_bytes("forge-transcript"));
  std::string transcript = make_otr_transcript(7);
  CHECK(transcript.find("mk=") != std::string::npos);
  CHECK(transcript.find("msg=") != std::string::npos);

  auto whole = forge_from_transcript(suite, transcript,
                                     to_bytes("never sent this"),
                                     otr::ForgeMode::kWholeMessage);
  CHECK(whole.verifies);
  CHECK(whole.forged.ciphertext == to_bytes("never sent this"));

  auto report = run_scenario("otr-transcript", builtin_profile("signal-like"));
  std::string joined;
  for (const auto& n : report.notes) joined += n + "\n";
  auto delta = forge_from_transcript(suite, joined, Bytes{0xff},
                                     otr::ForgeMode::kXorDelta);
  CHECK(delta.verifies);

  CHECK_THROWS_AS(forge_from_transcript(suite, "# no published keys\n", {},
                                        otr::ForgeMode::kWholeMessage),
                  RefusesToForgeUnpublished);
}

TEST_CASE("runs are deterministic for a fixed seed") {
  auto m1 = build_matrix(all_builtins(), 9).render_structured();
  auto m2 = build_matrix(all_builtins(), 9).render_structured();
  CHECK(m1 == m2);
  auto r1 = run_scenario("key-change", builtin_profile("whatsapp-like"), 9);
  auto r2 = run_scenario("key-change", builtin_profile("whatsapp-like"), 9);
  CHECK(r1.render_structured() == r2.render_structured());
}

TEST_CASE("structured renderings are valid json with the declared schema") {
  auto matrix = build_matrix({builtin_profile("signal-like")});
  auto mj = nlohmann::json::parse(matrix.render_structured());
  CHECK(mj["schema"] == "matrix/1");
  CHECK(mj["cells"].size() == matrix.cells.size());

  auto report = run_scenario("initial-setup", builtin_profile("signal-like"));
  auto rj = nlohmann::json::parse(report.render_structured());
  CHECK(rj["schema"] == "scenario/1");
  CHECK(rj["scenario"] == "initial-setup");
  CHECK(rj["events"].size() == report.events.size());

  auto text = matrix.render_text();
  CHECK(text.find("tofu") != std::string::npos);
  CHECK(text.find("signal-like") != std::string::npos);
  CHECK(report.render_text().find("scenario initial-setup") == 0);
}
