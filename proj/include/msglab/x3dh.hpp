#pragma once

#include <map>
#include <optional>
#include <string>

#include "msglab/crypto.hpp"

namespace msglab::x3dh {

using crypto::CryptoSuite;
using crypto::Element;
using crypto::KeyPair;

struct IdentityKeys {
  std::string owner;
  KeyPair ik;
};

struct SignedPrekeyPublic {
  std::uint32_t id = 0;
  Element pub = 0;
  Bytes signature;  // over the encoded SPK public, by the identity key
};

struct OneTimePrekeyPublic {
  std::uint32_t id = 0;
  Element pub = 0;
};

struct PrekeyBundle {
  Element ik_pub = 0;
  SignedPrekeyPublic spk;
  std::optional<OneTimePrekeyPublic> opk;

  Bytes serialize() const;
  static PrekeyBundle deserialize(ByteSpan data);
};

// Responder-side private halves of the published prekeys.
struct PrekeyPrivateStore {
  std::uint32_t spk_id = 0;
  KeyPair spk;
  std::map<std::uint32_t, KeyPair> opks;

  Bytes serialize() const;  // for erasure-inspection in tests
};

// Server-side registry of published bundles. Fetches consume one-time
// prekeys atomically; an OPK identifier is never served twice.
class PrekeyServer {
 public:
  void publish(const std::string& user, Element ik_pub,
               SignedPrekeyPublic spk,
               std::vector<OneTimePrekeyPublic> opks);
  PrekeyBundle fetch(const std::string& target);  // throws NoSuchUser
  bool has_user(const std::string& user) const;

 private:
  struct Record {
    Element ik_pub = 0;
    SignedPrekeyPublic spk;
    std::vector<OneTimePrekeyPublic> opks;
  };
  std::map<std::string, Record> records_;
};

struct InitialMessage {
  Element ik_a = 0;
  Element ek_a = 0;
  std::uint32_t spk_id = 0;
  std::optional<std::uint32_t> opk_id;
  Bytes ciphertext;

  Bytes serialize() const;
  static InitialMessage deserialize(ByteSpan data);
};

struct InitiateResult {
  Bytes sk;  // session secret, both sides equal on success
  InitialMessage message;
};

struct RespondResult {
  Bytes sk;
  Bytes first_plaintext;
};

// Phase 1: generate a fresh SPK and `opk_count` one-time prekeys, sign the
// SPK with the identity key and register the public halves with the server.
// Re-publication replaces the SPK and replenishes the OPKs.
void publish_bundle(CryptoSuite& suite, PrekeyServer& server,
                    const IdentityKeys& identity, PrekeyPrivateStore& store,
                    std::size_t opk_count);

// Phase 2. Throws SignatureInvalid when the SPK signature does not verify;
// no message is produced in that case. The ephemeral private key and DH
// intermediates live only inside the call.
InitiateResult initiate(CryptoSuite& suite, const IdentityKeys& alice,
                        const PrekeyBundle& bundle, ByteSpan first_plaintext);

// Phase 3. Consumes the referenced OPK private key from the store. Throws
// NoSuchPrekey for unknown identifiers and AbortAndErase when the initial
// ciphertext fails to decrypt (the derived SK is discarded).
RespondResult respond(const CryptoSuite& suite, const IdentityKeys& bob,
                      PrekeyPrivateStore& store, const InitialMessage& msg);

}  // namespace msglab::x3dh
