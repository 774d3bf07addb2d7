#pragma once

#include <map>
#include <optional>

#include "msglab/crypto.hpp"

namespace msglab::ratchet {

using crypto::CryptoSuite;
using crypto::Element;
using crypto::KeyPair;

constexpr std::size_t kMaxSkipPerChain = 512;
constexpr std::size_t kMaxSkipStore = 1000;

struct MessageHeader {
  Element ratchet_pub = 0;
  std::uint32_t pn = 0;  // length of the previous sending chain
  std::uint32_t n = 0;   // index in the current sending chain

  Bytes serialize() const;
};

struct Envelope {
  MessageHeader header;
  Bytes ciphertext;

  Bytes serialize() const;
  static Envelope deserialize(ByteSpan data);
};

struct RatchetState {
  Bytes rk;
  std::optional<Bytes> cks, ckr;
  KeyPair dhs;
  std::optional<Element> dhr;
  std::uint32_t ns = 0, nr = 0, pn = 0;
  // (remote ratchet public, index) -> stored message key
  std::map<std::pair<Element, std::uint32_t>, Bytes> skipped;

  // Every secret in the state, in one buffer. Tests scan this to assert
  // that deleted keys are really gone.
  Bytes serialize_secrets() const;
};

RatchetState init_initiator(CryptoSuite& suite, ByteSpan session_secret,
                            Element remote_ratchet_pub);
RatchetState init_responder(ByteSpan session_secret,
                            KeyPair own_ratchet_keypair);

std::pair<RatchetState, Envelope> ratchet_encrypt(CryptoSuite& suite,
                                                  const RatchetState& state,
                                                  ByteSpan plaintext,
                                                  ByteSpan ad);

// Performs a DH ratchet step first when the header carries a new remote
// public key, storing skipped message keys for any jumped-over indices.
// Throws AuthenticationFailure (state unchanged), TooManySkipped, or
// NoMatchingKey on a replay of an already-consumed envelope.
std::pair<RatchetState, Bytes> ratchet_decrypt(CryptoSuite& suite,
                                               const RatchetState& state,
                                               const Envelope& envelope,
                                               ByteSpan ad);

}  // namespace msglab::ratchet
