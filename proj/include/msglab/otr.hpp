#pragma once

#include <functional>
#include <vector>

#include "msglab/crypto.hpp"

namespace msglab::otr {

using crypto::CryptoSuite;
using crypto::Element;
using crypto::KeyPair;

struct OtrIdentity {
  std::string owner;
  KeyPair longterm;
};

struct OtrSession {
  KeyPair longterm;
  Element peer_longterm_pub = 0;
  bool established = false;

  Bytes ss;  // current shared secret; ek = Hash(ss), mk = Hash(ek)
  Bytes ek;
  Bytes mk;

  std::uint64_t send_counter = 0;
  bool i_sent_last = false;

  std::vector<Bytes> to_publish;     // old MAC keys awaiting the next message
  std::vector<Bytes> published_mks;  // MAC keys already sent in plaintext
  std::vector<Bytes> retired_mks;    // all MAC keys replaced by re-keys

  KeyPair next_dh;             // advertised on each message, used at re-key
  Element peer_next_dh = 0;    // peer's most recently advertised public

  Bytes serialize_secrets() const;  // erasure inspection for tests
};

struct OtrMessage {
  std::uint64_t counter = 0;
  Bytes ciphertext;
  Bytes tag;                        // MAC over the ciphertext only
  std::vector<Bytes> published_mks; // plaintext MAC-key publication
  Element next_dh = 0;              // advertised public for the next re-key

  Bytes serialize() const;
  static OtrMessage deserialize(ByteSpan data);
};

struct AkeTranscript {
  std::vector<Bytes> messages;  // exactly 4 on success
};

// Optional wire tamperer for adversarial tests: receives (message index,
// bytes), returns possibly rewritten bytes.
using AkeInterceptor = std::function<Bytes(int, Bytes)>;

// Four-message sign-and-MAC authenticated key exchange. Both returned
// sessions share ss on an honest run; any substitution of the DH values
// surfaces as AkeFailed during mutual authentication.
std::pair<std::pair<OtrSession, OtrSession>, AkeTranscript> ake_sigma_r(
    CryptoSuite& suite, const OtrIdentity& initiator,
    const OtrIdentity& responder, AkeInterceptor tamper = {});

// Encrypt-then-MAC transport. Attaches any MAC keys due for publication.
std::pair<OtrSession, OtrMessage> otr_send(const CryptoSuite& suite,
                                           const OtrSession& session,
                                           ByteSpan plaintext);

// Empty final message flushing any MAC keys still awaiting publication.
std::pair<OtrSession, OtrMessage> otr_shutdown(const CryptoSuite& suite,
                                               const OtrSession& session);

// Verifies under the current MAC key; a message that only verifies under a
// retired (published) key is rejected as ForgedUnderPublishedKey.
std::pair<OtrSession, Bytes> otr_receive(const CryptoSuite& suite,
                                         const OtrSession& session,
                                         const OtrMessage& message);

// Fresh DH on both sides; the old SS and EK are erased and the old MK
// queued for publication on each party's next message.
void rekey(CryptoSuite& suite, OtrSession& a, OtrSession& b);

// Socialist Millionaire Protocol over the suite group.
struct SmpTranscript {
  std::vector<Bytes> messages;  // the 4 exchanged messages
  bool equal = false;
};

SmpTranscript smp_run(CryptoSuite& suite, const OtrSession& session_a,
                      ByteSpan secret_a, const OtrSession& session_b,
                      ByteSpan secret_b);

enum class ForgeMode {
  kWholeMessage,  // payload is the forged ciphertext
  kXorDelta,      // payload XORed onto the reference ciphertext
};

// Produces a message verifying under `mk`, which must be in `published`;
// refuses otherwise. Demonstrates that a verifying transcript proves
// nothing about authorship once MAC keys are public.
OtrMessage forge_message(const CryptoSuite& suite,
                         const std::vector<Bytes>& published, const Bytes& mk,
                         ForgeMode mode, ByteSpan payload,
                         const OtrMessage& reference);

}  // namespace msglab::otr
