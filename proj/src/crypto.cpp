#include "msglab/crypto.hpp"

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/params.h>

#include <cstring>

namespace msglab::crypto {

namespace {

using u128 = unsigned __int128;

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<u128>(a) * b % m);
}

std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t result = 1;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    exp >>= 1;
  }
  return result;
}

// Deterministic Miller-Rabin, valid for all 64-bit inputs with this base set.
bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull,
                          23ull, 29ull, 31ull, 37ull}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  for (std::uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull,
                          23ull, 29ull, 31ull, 37ull}) {
    std::uint64_t x = powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

Bytes sha256(ByteSpan data) {
  Bytes out(32);
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

Bytes hmac_sha256(ByteSpan key, ByteSpan data) {
  static EVP_MAC* mac = EVP_MAC_fetch(nullptr, "HMAC", nullptr);
  EVP_MAC_CTX* ctx = EVP_MAC_CTX_new(mac);
  char digest_name[] = "SHA256";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_DIGEST, digest_name, 0),
      OSSL_PARAM_construct_end()};
  Bytes out(32);
  std::size_t len = 0;
  EVP_MAC_init(ctx, key.data(), key.size(), params);
  EVP_MAC_update(ctx, data.data(), data.size());
  EVP_MAC_final(ctx, out.data(), &len, out.size());
  EVP_MAC_CTX_free(ctx);
  return out;
}

std::uint64_t u64_from(ByteSpan digest) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | digest[i];
  return v;
}

// KDF domain-separation labels.
constexpr std::uint8_t kLabelMessageKey = 0x01;
constexpr std::uint8_t kLabelChainKey = 0x02;
constexpr std::uint8_t kLabelRoot = 0x03;

Bytes labelled(std::uint8_t label, ByteSpan data = {}) {
  Bytes msg{label};
  append(msg, data);
  return msg;
}

}  // namespace

void GroupParams::validate() const {
  if (!is_prime_u64(prime) || !is_prime_u64(order) || prime != 2 * order + 1)
    throw MalformedKey("group is not a safe prime");
  if (generator <= 1 || generator >= prime ||
      powmod(generator, order, prime) != 1)
    throw MalformedKey("generator does not have subgroup order");
}

bool GroupParams::is_member(Element x) const {
  return x > 1 && x < prime && powmod(x, order, prime) == 1;
}

Element GroupParams::mul(Element a, Element b) const {
  return mulmod(a, b, prime);
}

Element GroupParams::pow(Element base, std::uint64_t exp) const {
  return powmod(base, exp, prime);
}

Element GroupParams::inv(Element a) const {
  return powmod(a, prime - 2, prime);
}

GroupParams toy_group() {
  // Largest safe prime below 2^63; generator 4 is a quadratic residue.
  return GroupParams{0x7fffffffffffee27ull, 0x3ffffffffffff713ull, 4};
}

CryptoSuite::CryptoSuite(ByteSpan seed) : group_(toy_group()) {
  if (seed.empty()) throw ProtocolViolation("suite seed must be non-empty");
  group_.validate();
  Bytes digest = sha256(seed);
  std::seed_seq sseq(digest.begin(), digest.end());
  rng_.seed(sseq);
}

KeyPair CryptoSuite::generate_keypair() {
  Scalar priv = random_scalar();
  return KeyPair{priv, group_.pow(group_.generator, priv)};
}

Scalar CryptoSuite::random_scalar() {
  // Scalars in [1, order - 1]; modulo bias is irrelevant at desk scale.
  return rng_() % (group_.order - 1) + 1;
}

Bytes CryptoSuite::random_bytes(std::size_t n) {
  Bytes out(n);
  for (std::size_t i = 0; i < n; i += 8) {
    std::uint64_t word = rng_();
    for (std::size_t j = i; j < n && j < i + 8; ++j) {
      out[j] = static_cast<std::uint8_t>(word);
      word >>= 8;
    }
  }
  return out;
}

Bytes CryptoSuite::hash(ByteSpan data) const { return sha256(data); }

Bytes CryptoSuite::hmac(ByteSpan key, ByteSpan data) const {
  return hmac_sha256(key, data);
}

void CryptoSuite::check_member(Element pub) const {
  if (!group_.is_member(pub)) throw MalformedKey("not a valid group element");
}

Bytes CryptoSuite::dh(Scalar priv, Element pub) const {
  check_member(pub);
  Element shared = group_.pow(pub, priv);
  return sha256(encode_element(shared));
}

std::pair<Bytes, Bytes> CryptoSuite::kdf_rk(ByteSpan rk, ByteSpan dh_out) const {
  Bytes next_rk = hmac_sha256(rk, labelled(kLabelRoot, dh_out));
  Bytes ck = hmac_sha256(rk, labelled(kLabelChainKey, dh_out));
  return {std::move(next_rk), std::move(ck)};
}

std::pair<Bytes, Bytes> CryptoSuite::kdf_ck(ByteSpan ck) const {
  Bytes next_ck = hmac_sha256(ck, labelled(kLabelChainKey));
  Bytes mk = hmac_sha256(ck, labelled(kLabelMessageKey));
  return {std::move(next_ck), std::move(mk)};
}

Bytes CryptoSuite::stream_encrypt(ByteSpan key, std::uint64_t counter,
                                  ByteSpan data) const {
  Bytes out(data.begin(), data.end());
  Bytes block_input = be64(counter);
  put_u64(block_input, 0);
  for (std::size_t off = 0; off < out.size(); off += kHashLen) {
    // Last 8 bytes of the block input are the block index.
    for (int i = 0; i < 8; ++i)
      block_input[8 + i] =
          static_cast<std::uint8_t>((off / kHashLen) >> (8 * (7 - i)));
    Bytes ks = hmac_sha256(key, block_input);
    for (std::size_t i = off; i < out.size() && i < off + kHashLen; ++i)
      out[i] ^= ks[i - off];
  }
  return out;
}

Bytes CryptoSuite::aead_encrypt(ByteSpan key, ByteSpan plaintext,
                                ByteSpan ad) const {
  Bytes enc_key = hmac_sha256(key, to_bytes("aead-enc"));
  Bytes mac_key = hmac_sha256(key, to_bytes("aead-mac"));
  // Bind the associated data into the keystream as well as the tag.
  Bytes stream_key = hmac_sha256(enc_key, ad);
  Bytes out = stream_encrypt(stream_key, 0, plaintext);
  Bytes tag_input = be64(ad.size());
  append(tag_input, ad);
  append(tag_input, out);
  append(out, hmac_sha256(mac_key, tag_input));
  return out;
}

Bytes CryptoSuite::aead_decrypt(ByteSpan key, ByteSpan ciphertext,
                                ByteSpan ad) const {
  if (ciphertext.size() < kTagLen)
    throw AuthenticationFailure("ciphertext shorter than tag");
  ByteSpan body = ciphertext.first(ciphertext.size() - kTagLen);
  ByteSpan tag = ciphertext.last(kTagLen);
  Bytes mac_key = hmac_sha256(key, to_bytes("aead-mac"));
  Bytes tag_input = be64(ad.size());
  append(tag_input, ad);
  append(tag_input, body);
  Bytes expect = hmac_sha256(mac_key, tag_input);
  if (!std::equal(expect.begin(), expect.end(), tag.begin()))
    throw AuthenticationFailure("aead tag mismatch");
  Bytes enc_key = hmac_sha256(key, to_bytes("aead-enc"));
  Bytes stream_key = hmac_sha256(enc_key, ad);
  return stream_encrypt(stream_key, 0, body);
}

Bytes CryptoSuite::mac(ByteSpan key, ByteSpan data) const {
  return hmac_sha256(key, data);
}

bool CryptoSuite::verify_mac(ByteSpan key, ByteSpan data, ByteSpan tag) const {
  Bytes expect = hmac_sha256(key, data);
  return tag.size() == expect.size() &&
         std::equal(expect.begin(), expect.end(), tag.begin());
}

Bytes CryptoSuite::sign(Scalar identity_priv, ByteSpan data) const {
  // Deterministic Schnorr: nonce from the private key and message.
  Bytes nonce_input = to_bytes("schnorr-nonce");
  append(nonce_input, data);
  Scalar k = u64_from(hmac_sha256(be64(identity_priv), nonce_input)) %
                 (group_.order - 1) +
             1;
  Element commitment = group_.pow(group_.generator, k);
  Element pub = group_.pow(group_.generator, identity_priv);
  Bytes challenge_input = concat({encode_element(pub), data, encode_element(commitment)});
  Scalar e = u64_from(sha256(challenge_input)) % group_.order;
  Scalar s = (k + static_cast<unsigned __int128>(e) * identity_priv %
                      group_.order) %
             group_.order;
  Bytes sig = be64(e);
  put_u64(sig, s);
  return sig;
}

bool CryptoSuite::verify_sig(Element identity_pub, ByteSpan data,
                             ByteSpan sig) const {
  if (sig.size() != kSigLen || !group_.is_member(identity_pub)) return false;
  ByteReader r(sig);
  Scalar e = r.u64();
  Scalar s = r.u64();
  if (e >= group_.order || s >= group_.order) return false;
  // commitment = g^s * pub^-e
  Element commitment = group_.mul(group_.pow(group_.generator, s),
                                  group_.inv(group_.pow(identity_pub, e)));
  Bytes challenge_input =
      concat({encode_element(identity_pub), data, encode_element(commitment)});
  return u64_from(sha256(challenge_input)) % group_.order == e;
}

Element CryptoSuite::decode_element(ByteSpan b) {
  if (b.size() != kElementLen) throw MalformedKey("bad element width");
  return u64_from(b);
}

}  // namespace msglab::crypto
