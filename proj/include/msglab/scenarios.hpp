#pragma once

#include <string>
#include <vector>

#include "msglab/session.hpp"

namespace msglab::scenarios {

using session::PolicyProfile;
using session::Protocol;

constexpr std::uint64_t kDefaultSeed = 42;

// One judged property for one profile. Evidence grammar:
//   event:<i>   index into the report's event transcript
//   log:<i>     index into the report's network log
//   error:<E>   the named error was raised at the decision point
//   absent:<k>  judged by scanning the whole transcript for kind <k>
struct Cell {
  std::string property;
  std::string profile;
  std::string outcome;  // pass | fail | n/a
  std::string evidence;
};

struct ScenarioReport {
  std::string scenario;
  std::string profile;
  std::vector<Cell> cells;
  std::vector<std::string> notes;
  std::vector<session::SessionEvent> events;
  std::vector<std::string> net_log;

  std::string render_text() const;
  std::string render_structured() const;
};

struct PropertyMatrix {
  std::vector<std::string> properties;
  std::vector<std::string> profiles;
  std::vector<Cell> cells;

  const Cell* find(const std::string& property,
                   const std::string& profile) const;
  std::string render_text() const;
  std::string render_structured() const;
};

struct MatrixComparison {
  bool match = false;
  std::vector<std::string> mismatches;
};

ScenarioReport run_initial_setup(const PolicyProfile& profile,
                                 std::uint64_t seed = kDefaultSeed);
ScenarioReport run_key_change(const PolicyProfile& profile,
                              std::uint64_t seed = kDefaultSeed);
ScenarioReport run_key_change_in_transit(const PolicyProfile& profile,
                                         std::uint64_t seed = kDefaultSeed);
ScenarioReport run_verification(const PolicyProfile& profile,
                                std::uint64_t seed = kDefaultSeed);
ScenarioReport run_other_security(const PolicyProfile& profile,
                                  std::uint64_t seed = kDefaultSeed);

// Protocol-level property checks (forward secrecy, break-in recovery,
// out-of-order, dropped messages, asynchronicity, deniability).
ScenarioReport run_protocol_properties(Protocol protocol,
                                       std::uint64_t seed = kDefaultSeed);

std::vector<std::string> scenario_names();
ScenarioReport run_scenario(const std::string& name,
                            const PolicyProfile& profile,
                            std::uint64_t seed = kDefaultSeed);

// Runs all behavioral scenarios over each profile.
PropertyMatrix build_matrix(const std::vector<PolicyProfile>& profiles,
                            std::uint64_t seed = kDefaultSeed);

// The committed expectations for the six built-in profiles.
std::string expected_matrix_fixture();
MatrixComparison compare_matrix(const PropertyMatrix& matrix,
                                std::string_view fixture_text);

// Attacker's oracle for the forward-secrecy and break-in-recovery checks:
// enumerates every message key derivable from the compromised states
// (stored skipped keys plus chain-key advances up to `depth`) and counts
// how many recorded envelopes any of them decrypts.
std::size_t oracle_decrypt_count(
    const crypto::CryptoSuite& suite,
    const std::vector<ratchet::RatchetState>& states,
    const std::vector<ratchet::Envelope>& envelopes,
    std::size_t depth = ratchet::kMaxSkipPerChain);

// Recorded OTR conversation with one re-key: `mk=<hex>` lines for every
// MAC key the parties published, `msg=<hex>` lines for the wire messages.
std::string make_otr_transcript(std::uint64_t seed = kDefaultSeed);

struct ForgeDemo {
  Bytes mk;
  otr::OtrMessage forged;
  bool verifies = false;
};

// Forges a message from a recorded transcript under one of its published
// MAC keys. Throws RefusesToForgeUnpublished if the transcript has none.
ForgeDemo forge_from_transcript(const crypto::CryptoSuite& suite,
                                std::string_view transcript, ByteSpan payload,
                                otr::ForgeMode mode);

}  // namespace msglab::scenarios
