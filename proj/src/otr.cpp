#include "msglab/otr.hpp"

#include <algorithm>

namespace msglab::otr {

namespace {

constexpr std::uint16_t kWireVersion = 1;

Bytes enc(Element x) { return CryptoSuite::encode_element(x); }

struct SigmaKeys {
  Bytes enc_init, mac_init, enc_resp, mac_resp;
};

SigmaKeys sigma_keys(const CryptoSuite& suite, ByteSpan ss0) {
  return SigmaKeys{
      suite.hmac(ss0, to_bytes("sigma-enc-init")),
      suite.hmac(ss0, to_bytes("sigma-mac-init")),
      suite.hmac(ss0, to_bytes("sigma-enc-resp")),
      suite.hmac(ss0, to_bytes("sigma-mac-resp")),
  };
}

// identity payload: pub || signature over both exponentials || MAC over
// the identity, keyed from the DH secret
Bytes sigma_auth_payload(const CryptoSuite& suite, const KeyPair& longterm,
                         ByteSpan mac_key, Element first, Element second) {
  Bytes payload = enc(longterm.pub);
  append(payload, suite.sign(longterm.priv, concat({enc(first), enc(second)})));
  append(payload, suite.mac(mac_key, enc(longterm.pub)));
  return payload;
}

Element sigma_check_auth(const CryptoSuite& suite, ByteSpan payload,
                         ByteSpan mac_key, Element first, Element second) {
  if (payload.size() != CryptoSuite::kElementLen + CryptoSuite::kSigLen +
                            CryptoSuite::kTagLen)
    throw AkeFailed("authentication payload malformed");
  ByteReader r(payload);
  Element claimed_pub = CryptoSuite::decode_element(r.bytes(8));
  Bytes sig = r.bytes(CryptoSuite::kSigLen);
  Bytes tag = r.bytes(CryptoSuite::kTagLen);
  if (!suite.verify_sig(claimed_pub, concat({enc(first), enc(second)}), sig))
    throw AkeFailed("signature over DH exponentials failed");
  if (!suite.verify_mac(mac_key, enc(claimed_pub), tag))
    throw AkeFailed("identity MAC failed");
  return claimed_pub;
}

OtrSession make_session(CryptoSuite& suite, const KeyPair& longterm,
                        Element peer_pub, ByteSpan ss) {
  OtrSession s;
  s.longterm = longterm;
  s.peer_longterm_pub = peer_pub;
  s.established = true;
  s.ss = Bytes(ss.begin(), ss.end());
  s.ek = suite.hash(s.ss);
  s.mk = suite.hash(s.ek);
  s.next_dh = suite.generate_keypair();
  return s;
}

// published_mks is a set: re-keys are joint, so both parties hold the same
// retired key and may each publish it.
void record_published(std::vector<Bytes>& published, const Bytes& mk) {
  if (std::find(published.begin(), published.end(), mk) == published.end())
    published.push_back(mk);
}

std::uint64_t u64_of(ByteSpan digest) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | digest[i];
  return v;
}

}  // namespace

Bytes OtrSession::serialize_secrets() const {
  Bytes out = ss;
  append(out, ek);
  append(out, mk);
  put_u64(out, next_dh.priv);
  return out;
}

Bytes OtrMessage::serialize() const {
  Bytes out;
  put_u16(out, kWireVersion);
  put_u64(out, counter);
  put_u32(out, static_cast<std::uint32_t>(ciphertext.size()));
  append(out, ciphertext);
  append(out, tag);
  put_u16(out, static_cast<std::uint16_t>(published_mks.size()));
  for (const auto& mk : published_mks) append(out, mk);
  put_u64(out, next_dh);
  return out;
}

OtrMessage OtrMessage::deserialize(ByteSpan data) {
  ByteReader r(data);
  if (r.u16() != kWireVersion) throw MalformedKey("otr message version");
  OtrMessage m;
  m.counter = r.u64();
  m.ciphertext = r.bytes(r.u32());
  m.tag = r.bytes(CryptoSuite::kTagLen);
  std::uint16_t count = r.u16();
  for (std::uint16_t i = 0; i < count; ++i)
    m.published_mks.push_back(r.bytes(CryptoSuite::kKeyLen));
  m.next_dh = r.u64();
  return m;
}

std::pair<std::pair<OtrSession, OtrSession>, AkeTranscript> ake_sigma_r(
    CryptoSuite& suite, const OtrIdentity& initiator,
    const OtrIdentity& responder, AkeInterceptor tamper) {
  auto deliver = [&](int index, Bytes wire) {
    return tamper ? tamper(index, std::move(wire)) : wire;
  };
  AkeTranscript transcript;

  // m1/m2: plain DH exponentials.
  KeyPair x = suite.generate_keypair();
  Bytes m1 = deliver(1, enc(x.pub));
  transcript.messages.push_back(m1);
  Element gx_resp = CryptoSuite::decode_element(m1);  // responder's view

  KeyPair y = suite.generate_keypair();
  Bytes m2 = deliver(2, enc(y.pub));
  transcript.messages.push_back(m2);
  Element gy_init = CryptoSuite::decode_element(m2);  // initiator's view

  Bytes ss_init = suite.dh(x.priv, gy_init);
  Bytes ss_resp = suite.dh(y.priv, gx_resp);
  SigmaKeys keys_init = sigma_keys(suite, ss_init);
  SigmaKeys keys_resp = sigma_keys(suite, ss_resp);

  // m3: initiator authenticates inside the encrypted channel.
  Bytes m3 = deliver(
      3, suite.aead_encrypt(keys_init.enc_init,
                            sigma_auth_payload(suite, initiator.longterm,
                                               keys_init.mac_init, x.pub,
                                               gy_init),
                            to_bytes("sigma-m3")));
  transcript.messages.push_back(m3);
  Bytes m3_payload;
  try {
    m3_payload = suite.aead_decrypt(keys_resp.enc_init, m3, to_bytes("sigma-m3"));
  } catch (const AuthenticationFailure&) {
    throw AkeFailed("initiator authentication undecryptable");
  }
  Element init_pub =
      sigma_check_auth(suite, m3_payload, keys_resp.mac_init, gx_resp, y.pub);

  // m4: responder authenticates symmetrically.
  Bytes m4 = deliver(
      4, suite.aead_encrypt(keys_resp.enc_resp,
                            sigma_auth_payload(suite, responder.longterm,
                                               keys_resp.mac_resp, y.pub,
                                               gx_resp),
                            to_bytes("sigma-m4")));
  transcript.messages.push_back(m4);
  Bytes m4_payload;
  try {
    m4_payload = suite.aead_decrypt(keys_init.enc_resp, m4, to_bytes("sigma-m4"));
  } catch (const AuthenticationFailure&) {
    throw AkeFailed("responder authentication undecryptable");
  }
  Element resp_pub =
      sigma_check_auth(suite, m4_payload, keys_init.mac_resp, gy_init, x.pub);

  OtrSession session_a =
      make_session(suite, initiator.longterm, resp_pub, ss_init);
  OtrSession session_b =
      make_session(suite, responder.longterm, init_pub, ss_resp);
  return {{std::move(session_a), std::move(session_b)}, std::move(transcript)};
}

std::pair<OtrSession, OtrMessage> otr_send(const CryptoSuite& suite,
                                           const OtrSession& session,
                                           ByteSpan plaintext) {
  if (!session.established) throw NotEstablished("no OTR session");
  OtrSession next = session;
  OtrMessage msg;
  msg.counter = next.send_counter;
  next.send_counter += 1;
  msg.ciphertext = suite.stream_encrypt(next.ek, msg.counter, plaintext);
  msg.tag = suite.mac(next.mk, msg.ciphertext);
  msg.published_mks = std::move(next.to_publish);
  next.to_publish.clear();
  for (const auto& mk : msg.published_mks)
    record_published(next.published_mks, mk);
  msg.next_dh = next.next_dh.pub;
  next.i_sent_last = true;
  return {std::move(next), std::move(msg)};
}

std::pair<OtrSession, OtrMessage> otr_shutdown(const CryptoSuite& suite,
                                               const OtrSession& session) {
  return otr_send(suite, session, {});
}

std::pair<OtrSession, Bytes> otr_receive(const CryptoSuite& suite,
                                         const OtrSession& session,
                                         const OtrMessage& message) {
  if (!session.established) throw NotEstablished("no OTR session");
  if (!suite.verify_mac(session.mk, message.ciphertext, message.tag)) {
    for (const auto& old_mk : session.retired_mks) {
      if (suite.verify_mac(old_mk, message.ciphertext, message.tag))
        throw ForgedUnderPublishedKey(
            "message authenticated under a retired MAC key");
    }
    throw AuthenticationFailure("otr MAC mismatch");
  }
  OtrSession next = session;
  Bytes plaintext =
      suite.stream_encrypt(next.ek, message.counter, message.ciphertext);
  // Record the peer's published MAC keys; they feed the forgery tooling.
  for (const auto& mk : message.published_mks)
    record_published(next.published_mks, mk);
  next.peer_next_dh = message.next_dh;
  next.i_sent_last = false;
  return {std::move(next), std::move(plaintext)};
}

void rekey(CryptoSuite& suite, OtrSession& a, OtrSession& b) {
  Bytes ss = suite.dh(a.next_dh.priv, b.next_dh.pub);
  for (OtrSession* s : {&a, &b}) {
    s->retired_mks.push_back(s->mk);
    s->to_publish.push_back(s->mk);
    s->ss = ss;
    s->ek = suite.hash(s->ss);
    s->mk = suite.hash(s->ek);
    s->send_counter = 0;
    s->next_dh = suite.generate_keypair();
  }
}

SmpTranscript smp_run(CryptoSuite& suite, const OtrSession& session_a,
                      ByteSpan secret_a, const OtrSession& session_b,
                      ByteSpan secret_b) {
  const auto& g = suite.group();
  auto scalar_of = [&](const OtrSession& s, ByteSpan secret) {
    // Session-bound input: a mismatched transport secret (MITM legs)
    // yields unequal even for matching user secrets.
    Bytes input = s.ss;
    append(input, secret);
    return u64_of(suite.hash(input)) % (g.order - 1) + 1;
  };
  auto check = [&](Element e) {
    if (!g.is_member(e)) throw SmpAborted("non-member element in SMP message");
    return e;
  };
  std::uint64_t x = scalar_of(session_a, secret_a);
  std::uint64_t y = scalar_of(session_b, secret_b);

  std::uint64_t a2 = suite.random_scalar(), a3 = suite.random_scalar();
  std::uint64_t b2 = suite.random_scalar(), b3 = suite.random_scalar();
  std::uint64_t r = suite.random_scalar(), s = suite.random_scalar();
  Element g1 = g.generator;

  SmpTranscript t;
  Element g2a = g.pow(g1, a2), g3a = g.pow(g1, a3);
  t.messages.push_back(concat({enc(g2a), enc(g3a)}));

  Element g2b = g.pow(g1, b2), g3b = g.pow(g1, b3);
  Element g2_b = g.pow(check(g2a), b2), g3_b = g.pow(check(g3a), b3);
  Element pb = g.pow(g3_b, r);
  Element qb = g.mul(g.pow(g1, r), g.pow(g2_b, y));
  t.messages.push_back(concat({enc(g2b), enc(g3b), enc(pb), enc(qb)}));

  Element g2_a = g.pow(check(g2b), a2), g3_a = g.pow(check(g3b), a3);
  Element pa = g.pow(g3_a, s);
  Element qa = g.mul(g.pow(g1, s), g.pow(g2_a, x));
  Element ra = g.pow(g.mul(check(qa), g.inv(check(qb))), a3);
  t.messages.push_back(concat({enc(pa), enc(qa), enc(ra)}));

  Element rb = g.pow(g.mul(qa, g.inv(qb)), b3);
  t.messages.push_back(enc(rb));

  Element rab_a = g.pow(check(rb), a3);
  Element verdict_target = g.mul(pa, g.inv(pb));
  t.equal = (rab_a == verdict_target);
  // The responder's verdict is the same value computed from ra.
  Element rab_b = g.pow(check(ra), b3);
  if ((rab_b == verdict_target) != t.equal)
    throw SmpAborted("parties disagree on outcome");
  return t;
}

OtrMessage forge_message(const CryptoSuite& suite,
                         const std::vector<Bytes>& published, const Bytes& mk,
                         ForgeMode mode, ByteSpan payload,
                         const OtrMessage& reference) {
  if (std::find(published.begin(), published.end(), mk) == published.end())
    throw RefusesToForgeUnpublished("MAC key was never published");
  OtrMessage forged;
  forged.counter = reference.counter;
  forged.next_dh = reference.next_dh;
  if (mode == ForgeMode::kWholeMessage) {
    forged.ciphertext = Bytes(payload.begin(), payload.end());
  } else {
    forged.ciphertext = reference.ciphertext;
    for (std::size_t i = 0; i < payload.size() && i < forged.ciphertext.size();
         ++i)
      forged.ciphertext[i] ^= payload[i];
  }
  forged.tag = suite.mac(mk, forged.ciphertext);
  return forged;
}

}  // namespace msglab::otr
