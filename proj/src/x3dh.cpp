#include "msglab/x3dh.hpp"

#include <algorithm>

namespace msglab::x3dh {

namespace {

constexpr std::uint16_t kWireVersion = 1;

Bytes put_field(ByteSpan data) {
  Bytes out;
  put_u16(out, static_cast<std::uint16_t>(data.size()));
  append(out, data);
  return out;
}

// SK = HMAC(zero key, "X3DH" || DH1 || DH2 || DH3 [|| DH4])
Bytes derive_sk(const CryptoSuite& suite, ByteSpan dh1, ByteSpan dh2,
                ByteSpan dh3, const std::optional<Bytes>& dh4) {
  Bytes input = to_bytes("X3DH");
  append(input, dh1);
  append(input, dh2);
  append(input, dh3);
  if (dh4) append(input, *dh4);
  Bytes zero(CryptoSuite::kKeyLen, 0);
  return suite.hmac(zero, input);
}

Bytes associated_data(Element ik_a, Element ik_b) {
  return concat({CryptoSuite::encode_element(ik_a),
                 CryptoSuite::encode_element(ik_b)});
}

}  // namespace

Bytes PrekeyBundle::serialize() const {
  Bytes out;
  put_u16(out, kWireVersion);
  put_u64(out, ik_pub);
  put_u32(out, spk.id);
  put_u64(out, spk.pub);
  append(out, put_field(spk.signature));
  if (opk) {
    out.push_back(1);
    put_u32(out, opk->id);
    put_u64(out, opk->pub);
  } else {
    out.push_back(0);
  }
  return out;
}

PrekeyBundle PrekeyBundle::deserialize(ByteSpan data) {
  ByteReader r(data);
  if (r.u16() != kWireVersion) throw MalformedKey("bundle version");
  PrekeyBundle b;
  b.ik_pub = r.u64();
  b.spk.id = r.u32();
  b.spk.pub = r.u64();
  b.spk.signature = r.bytes(r.u16());
  if (r.u8() != 0) {
    OneTimePrekeyPublic opk;
    opk.id = r.u32();
    opk.pub = r.u64();
    b.opk = opk;
  }
  return b;
}

Bytes PrekeyPrivateStore::serialize() const {
  Bytes out;
  put_u32(out, spk_id);
  put_u64(out, spk.priv);
  put_u64(out, spk.pub);
  put_u32(out, static_cast<std::uint32_t>(opks.size()));
  for (const auto& [id, kp] : opks) {
    put_u32(out, id);
    put_u64(out, kp.priv);
    put_u64(out, kp.pub);
  }
  return out;
}

void PrekeyServer::publish(const std::string& user, Element ik_pub,
                           SignedPrekeyPublic spk,
                           std::vector<OneTimePrekeyPublic> opks) {
  records_[user] = Record{ik_pub, std::move(spk), std::move(opks)};
}

PrekeyBundle PrekeyServer::fetch(const std::string& target) {
  auto it = records_.find(target);
  if (it == records_.end()) throw NoSuchUser("no bundle for " + target);
  PrekeyBundle b;
  b.ik_pub = it->second.ik_pub;
  b.spk = it->second.spk;
  auto& opks = it->second.opks;
  if (!opks.empty()) {
    b.opk = opks.front();
    opks.erase(opks.begin());
  }
  return b;
}

bool PrekeyServer::has_user(const std::string& user) const {
  return records_.contains(user);
}

Bytes InitialMessage::serialize() const {
  Bytes out;
  put_u16(out, kWireVersion);
  append(out, put_field(CryptoSuite::encode_element(ik_a)));
  append(out, put_field(CryptoSuite::encode_element(ek_a)));
  Bytes spk_bytes;
  put_u32(spk_bytes, spk_id);
  append(out, put_field(spk_bytes));
  if (opk_id) {
    Bytes opk_bytes;
    put_u32(opk_bytes, *opk_id);
    append(out, put_field(opk_bytes));
  } else {
    append(out, put_field({}));  // zero-length field marks an absent OPK
  }
  append(out, put_field(ciphertext));
  return out;
}

InitialMessage InitialMessage::deserialize(ByteSpan data) {
  ByteReader r(data);
  if (r.u16() != kWireVersion) throw MalformedKey("initial message version");
  InitialMessage m;
  m.ik_a = CryptoSuite::decode_element(r.bytes(r.u16()));
  m.ek_a = CryptoSuite::decode_element(r.bytes(r.u16()));
  {
    Bytes spk_bytes = r.bytes(r.u16());
    ByteReader fr(spk_bytes);
    m.spk_id = fr.u32();
  }
  Bytes opk_bytes = r.bytes(r.u16());
  if (!opk_bytes.empty()) {
    ByteReader fr(opk_bytes);
    m.opk_id = fr.u32();
  }
  m.ciphertext = r.bytes(r.u16());
  return m;
}

void publish_bundle(CryptoSuite& suite, PrekeyServer& server,
                    const IdentityKeys& identity, PrekeyPrivateStore& store,
                    std::size_t opk_count) {
  store.spk_id += 1;
  store.spk = suite.generate_keypair();
  store.opks.clear();
  SignedPrekeyPublic spk;
  spk.id = store.spk_id;
  spk.pub = store.spk.pub;
  spk.signature =
      suite.sign(identity.ik.priv, CryptoSuite::encode_element(store.spk.pub));
  std::vector<OneTimePrekeyPublic> opks;
  for (std::size_t i = 0; i < opk_count; ++i) {
    KeyPair kp = suite.generate_keypair();
    // OPK ids stay unique across republications.
    std::uint32_t id = store.spk_id * 1000 + static_cast<std::uint32_t>(i);
    store.opks[id] = kp;
    opks.push_back(OneTimePrekeyPublic{id, kp.pub});
  }
  server.publish(identity.owner, identity.ik.pub, std::move(spk),
                 std::move(opks));
}

InitiateResult initiate(CryptoSuite& suite, const IdentityKeys& alice,
                        const PrekeyBundle& bundle, ByteSpan first_plaintext) {
  if (!suite.verify_sig(bundle.ik_pub,
                        CryptoSuite::encode_element(bundle.spk.pub),
                        bundle.spk.signature))
    throw SignatureInvalid("prekey signature does not verify");

  KeyPair ek = suite.generate_keypair();
  Bytes dh1 = suite.dh(alice.ik.priv, bundle.spk.pub);
  Bytes dh2 = suite.dh(ek.priv, bundle.ik_pub);
  Bytes dh3 = suite.dh(ek.priv, bundle.spk.pub);
  std::optional<Bytes> dh4;
  if (bundle.opk) dh4 = suite.dh(ek.priv, bundle.opk->pub);

  InitiateResult result;
  result.sk = derive_sk(suite, dh1, dh2, dh3, dh4);
  result.message.ik_a = alice.ik.pub;
  result.message.ek_a = ek.pub;
  result.message.spk_id = bundle.spk.id;
  if (bundle.opk) result.message.opk_id = bundle.opk->id;
  Bytes ad = associated_data(alice.ik.pub, bundle.ik_pub);
  result.message.ciphertext = suite.aead_encrypt(result.sk, first_plaintext, ad);
  return result;
  // ek.priv and the DH outputs go out of scope here; no state retains them.
}

RespondResult respond(const CryptoSuite& suite, const IdentityKeys& bob,
                      PrekeyPrivateStore& store, const InitialMessage& msg) {
  if (msg.spk_id != store.spk_id)
    throw NoSuchPrekey("unknown signed prekey id");
  std::optional<KeyPair> opk;
  if (msg.opk_id) {
    auto it = store.opks.find(*msg.opk_id);
    if (it == store.opks.end())
      throw NoSuchPrekey("unknown or consumed one-time prekey id");
    opk = it->second;
  }

  Bytes dh1 = suite.dh(store.spk.priv, msg.ik_a);
  Bytes dh2 = suite.dh(bob.ik.priv, msg.ek_a);
  Bytes dh3 = suite.dh(store.spk.priv, msg.ek_a);
  std::optional<Bytes> dh4;
  if (opk) dh4 = suite.dh(opk->priv, msg.ek_a);

  Bytes sk = derive_sk(suite, dh1, dh2, dh3, dh4);
  Bytes ad = associated_data(msg.ik_a, bob.ik.pub);
  Bytes plaintext;
  try {
    plaintext = suite.aead_decrypt(sk, msg.ciphertext, ad);
  } catch (const AuthenticationFailure&) {
    std::fill(sk.begin(), sk.end(), 0);
    throw AbortAndErase("initial ciphertext failed to decrypt");
  }
  // Only after a successful decryption is the one-time prekey burned.
  if (msg.opk_id) store.opks.erase(*msg.opk_id);
  return RespondResult{std::move(sk), std::move(plaintext)};
}

}  // namespace msglab::x3dh
