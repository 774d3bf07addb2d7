#pragma once

#include <random>
#include <utility>

#include "msglab/bytes.hpp"
#include "msglab/errors.hpp"

namespace msglab::crypto {

using Scalar = std::uint64_t;
using Element = std::uint64_t;

// Multiplicative group modulo a safe prime. Elements fit in 64 bits;
// products go through 128-bit intermediates. The working subgroup is the
// quadratic residues, of prime order (prime - 1) / 2.
struct GroupParams {
  std::uint64_t prime;
  std::uint64_t order;      // subgroup order, (prime - 1) / 2
  std::uint64_t generator;  // generates the order-`order` subgroup

  void validate() const;  // throws MalformedKey on a bad group
  bool is_member(Element x) const;

  Element mul(Element a, Element b) const;
  Element pow(Element base, std::uint64_t exp) const;
  Element inv(Element a) const;
};

// The fixed desk-scale group used by the toy suite.
GroupParams toy_group();

struct KeyPair {
  Scalar priv = 0;
  Element pub = 0;
};

// Deterministic toy cryptography suite: DH over a small validated
// safe-prime group, SHA-256/HMAC-based KDF, MAC and encrypt-then-MAC AEAD,
// a malleable counter-mode stream cipher, and Schnorr signatures. All
// randomness comes from the seeded generator; everything else is a pure
// function of its inputs.
class CryptoSuite {
 public:
  static constexpr std::size_t kHashLen = 32;
  static constexpr std::size_t kKeyLen = 32;
  static constexpr std::size_t kTagLen = 32;
  static constexpr std::size_t kElementLen = 8;
  static constexpr std::size_t kSigLen = 16;

  explicit CryptoSuite(ByteSpan seed);

  const GroupParams& group() const { return group_; }

  KeyPair generate_keypair();
  Scalar random_scalar();
  Bytes random_bytes(std::size_t n);

  Bytes hash(ByteSpan data) const;  // SHA-256
  Bytes hmac(ByteSpan key, ByteSpan data) const;

  // Diffie-Hellman: hash of the serialized shared group element.
  Bytes dh(Scalar priv, Element pub) const;

  // Root-chain KDF: (rk', ck). Domain-separated by single-byte labels.
  std::pair<Bytes, Bytes> kdf_rk(ByteSpan rk, ByteSpan dh_out) const;
  // Chain KDF: (ck', mk).
  std::pair<Bytes, Bytes> kdf_ck(ByteSpan ck) const;

  // AEAD, encrypt-then-MAC. Ciphertext = body || 32-byte tag.
  Bytes aead_encrypt(ByteSpan key, ByteSpan plaintext, ByteSpan ad) const;
  Bytes aead_decrypt(ByteSpan key, ByteSpan ciphertext, ByteSpan ad) const;

  // Malleable counter-mode stream cipher; no integrity. Same call
  // decrypts. Counter reuse under one key is a caller-contract violation.
  Bytes stream_encrypt(ByteSpan key, std::uint64_t counter,
                       ByteSpan data) const;

  Bytes mac(ByteSpan key, ByteSpan data) const;
  bool verify_mac(ByteSpan key, ByteSpan data, ByteSpan tag) const;

  // Schnorr signatures over the suite group, deterministic nonce.
  Bytes sign(Scalar identity_priv, ByteSpan data) const;
  bool verify_sig(Element identity_pub, ByteSpan data, ByteSpan sig) const;

  static Bytes encode_element(Element x) { return be64(x); }
  static Element decode_element(ByteSpan b);

 private:
  void check_member(Element pub) const;  // throws MalformedKey

  GroupParams group_;
  std::mt19937_64 rng_;
};

inline CryptoSuite make_toy_suite(ByteSpan seed) { return CryptoSuite(seed); }

}  // namespace msglab::crypto
