#include "msglab/ratchet.hpp"

namespace msglab::ratchet {

namespace {

constexpr std::uint16_t kWireVersion = 1;

Bytes bound_ad(ByteSpan caller_ad, const MessageHeader& header) {
  Bytes ad(caller_ad.begin(), caller_ad.end());
  append(ad, header.serialize());
  return ad;
}

// Advance a receiving chain, storing message keys for skipped indices.
void skip_to(const CryptoSuite& suite, RatchetState& state,
             std::uint32_t until) {
  if (!state.ckr) return;
  if (until > state.nr + kMaxSkipPerChain)
    throw TooManySkipped("would skip past per-chain bound");
  while (state.nr < until) {
    auto [next_ck, mk] = suite.kdf_ck(*state.ckr);
    if (state.skipped.size() >= kMaxSkipStore)
      throw TooManySkipped("skipped-key store full");
    state.skipped[{*state.dhr, state.nr}] = mk;
    state.ckr = next_ck;
    state.nr += 1;
  }
}

void dh_ratchet(CryptoSuite& suite, RatchetState& state, Element remote_pub) {
  state.pn = state.ns;
  state.ns = 0;
  state.nr = 0;
  state.dhr = remote_pub;
  auto [rk1, ckr] = suite.kdf_rk(state.rk, suite.dh(state.dhs.priv, remote_pub));
  state.dhs = suite.generate_keypair();
  auto [rk2, cks] = suite.kdf_rk(rk1, suite.dh(state.dhs.priv, remote_pub));
  state.rk = rk2;  // the previous root key is overwritten, not kept
  state.ckr = ckr;
  state.cks = cks;
}

}  // namespace

Bytes MessageHeader::serialize() const {
  Bytes out;
  append(out, CryptoSuite::encode_element(ratchet_pub));
  put_u32(out, pn);
  put_u32(out, n);
  return out;
}

Bytes Envelope::serialize() const {
  Bytes out;
  put_u16(out, kWireVersion);
  append(out, header.serialize());
  put_u32(out, static_cast<std::uint32_t>(ciphertext.size()));
  append(out, ciphertext);
  return out;
}

Envelope Envelope::deserialize(ByteSpan data) {
  ByteReader r(data);
  if (r.u16() != kWireVersion) throw MalformedKey("envelope version");
  Envelope e;
  e.header.ratchet_pub = CryptoSuite::decode_element(r.bytes(8));
  e.header.pn = r.u32();
  e.header.n = r.u32();
  e.ciphertext = r.bytes(r.u32());
  return e;
}

Bytes RatchetState::serialize_secrets() const {
  Bytes out = rk;
  if (cks) append(out, *cks);
  if (ckr) append(out, *ckr);
  put_u64(out, dhs.priv);
  for (const auto& [key, mk] : skipped) append(out, mk);
  return out;
}

RatchetState init_initiator(CryptoSuite& suite, ByteSpan session_secret,
                            Element remote_ratchet_pub) {
  if (!suite.group().is_member(remote_ratchet_pub))
    throw MalformedKey("remote ratchet public is not a group element");
  RatchetState state;
  state.dhs = suite.generate_keypair();
  state.dhr = remote_ratchet_pub;
  auto [rk, cks] = suite.kdf_rk(session_secret,
                                suite.dh(state.dhs.priv, remote_ratchet_pub));
  state.rk = rk;
  state.cks = cks;
  return state;
}

RatchetState init_responder(ByteSpan session_secret,
                            KeyPair own_ratchet_keypair) {
  RatchetState state;
  state.rk = Bytes(session_secret.begin(), session_secret.end());
  state.dhs = own_ratchet_keypair;
  return state;
}

std::pair<RatchetState, Envelope> ratchet_encrypt(CryptoSuite& suite,
                                                  const RatchetState& state,
                                                  ByteSpan plaintext,
                                                  ByteSpan ad) {
  if (!state.cks) throw ProtocolViolation("sending chain not established");
  RatchetState next = state;
  auto [ck, mk] = suite.kdf_ck(*next.cks);
  next.cks = ck;
  Envelope envelope;
  envelope.header =
      MessageHeader{next.dhs.pub, next.pn, next.ns};
  next.ns += 1;
  envelope.ciphertext =
      suite.aead_encrypt(mk, plaintext, bound_ad(ad, envelope.header));
  return {std::move(next), std::move(envelope)};
}

std::pair<RatchetState, Bytes> ratchet_decrypt(CryptoSuite& suite,
                                               const RatchetState& state,
                                               const Envelope& envelope,
                                               ByteSpan ad) {
  const MessageHeader& h = envelope.header;
  Bytes full_ad = bound_ad(ad, h);

  // Stored skipped key for an out-of-order arrival.
  if (auto it = state.skipped.find({h.ratchet_pub, h.n});
      it != state.skipped.end()) {
    Bytes plaintext = suite.aead_decrypt(it->second, envelope.ciphertext, full_ad);
    RatchetState next = state;
    next.skipped.erase({h.ratchet_pub, h.n});
    return {std::move(next), std::move(plaintext)};
  }

  RatchetState next = state;
  if (!next.dhr || h.ratchet_pub != *next.dhr) {
    // New remote ratchet key: close out the current receiving chain, then
    // step the DH ratchet and skip within the new chain.
    skip_to(suite, next, h.pn);
    dh_ratchet(suite, next, h.ratchet_pub);
  } else if (h.n < next.nr) {
    // In the current chain but already consumed, and not in the store.
    throw NoMatchingKey("message key already used and deleted");
  }
  skip_to(suite, next, h.n);
  auto [ck, mk] = suite.kdf_ck(*next.ckr);
  Bytes plaintext = suite.aead_decrypt(mk, envelope.ciphertext, full_ad);
  next.ckr = ck;
  next.nr += 1;
  return {std::move(next), std::move(plaintext)};
}

}  // namespace msglab::ratchet
