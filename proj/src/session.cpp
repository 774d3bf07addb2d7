#include "msglab/session.hpp"

#include <algorithm>
#include <sstream>

namespace msglab::session {

namespace {

// First payload byte of a "msg" delivery.
constexpr std::uint8_t kTagInitial = 0x01;
constexpr std::uint8_t kTagEnvelope = 0x02;
constexpr std::uint8_t kTagPlain = 0x03;
constexpr std::uint8_t kTagOtr = 0x04;

constexpr std::uint8_t kReceiptDelivered = 2;

constexpr std::size_t kOpkBatch = 8;

std::string notify_name(Notify n) {
  switch (n) {
    case Notify::kNone: return "none";
    case Notify::kImmediate: return "immediate";
    case Notify::kDeferred: return "deferred";
  }
  return "none";
}

std::string status_name(StatusDetail s) {
  return s == StatusDetail::kAll ? "all" : "last-only";
}

}  // namespace

void PolicyProfile::validate() const {
  if (name.empty()) throw BadProfile("profile needs a name");
  if (reencrypt_and_resend && per_message_status != StatusDetail::kAll)
    throw BadProfile("reencrypt_and_resend requires full per-message status");
  if (encryption_irreversible && !e2e_opt_in)
    throw BadProfile("encryption_irreversible only applies to opt-in profiles");
}

std::vector<std::string> builtin_profile_names() {
  return {"signal-like", "whatsapp-like", "wire-like",
          "viber-like",  "riot-like",     "telegram-like"};
}

PolicyProfile builtin_profile(const std::string& name) {
  PolicyProfile p;
  p.name = name;
  if (name == "signal-like") {
    p.tofu = true;
    p.notify_key_change = Notify::kDeferred;
    p.block_until_verified = true;
    p.qr_fingerprint = true;
    p.export_fingerprint = true;
    p.passphrase_lock = true;
    p.screen_security = true;
  } else if (name == "whatsapp-like") {
    p.tofu = true;
    p.notify_e2e_banner = true;
    p.notify_key_change = Notify::kImmediate;
    p.reencrypt_and_resend = true;
    p.qr_fingerprint = true;
    p.export_fingerprint = true;
    p.two_step_verification = true;
  } else if (name == "wire-like") {
    p.verified_check = true;
    p.verification_required_event = true;
  } else if (name == "viber-like") {
    p.verified_check = true;
    p.clear_trusted_contacts = true;
    p.per_message_status = StatusDetail::kLastOnly;
  } else if (name == "riot-like") {
    p.notify_e2e_banner = true;
    p.notify_key_change = Notify::kImmediate;
    p.verified_check = true;
    p.e2e_opt_in = true;
    p.encryption_irreversible = true;
    p.history_locked_to_keys = true;
  } else if (name == "telegram-like") {
    p.notify_e2e_banner = true;
    p.qr_fingerprint = true;
    p.e2e_opt_in = true;
    p.session_locked_to_keys = true;
    p.two_step_verification = true;
    p.passphrase_lock = true;
    p.screen_security = true;
  } else {
    throw BadProfile("unknown built-in profile: " + name);
  }
  p.validate();
  return p;
}

PolicyProfile parse_profile(std::string_view text) {
  PolicyProfile p;
  bool named = false;
  std::istringstream in{std::string(text)};
  std::string line;
  auto as_bool = [](const std::string& v, const std::string& key) {
    if (v == "on") return true;
    if (v == "off") return false;
    throw BadProfile("expected on/off for " + key);
  };
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    if (key.empty() || key[0] == '#') continue;
    if (key == "profile") {
      p.name = value;
      named = true;
    } else if (key == "notify_key_change") {
      if (value == "none") p.notify_key_change = Notify::kNone;
      else if (value == "immediate") p.notify_key_change = Notify::kImmediate;
      else if (value == "deferred") p.notify_key_change = Notify::kDeferred;
      else throw BadProfile("bad notify_key_change value: " + value);
    } else if (key == "per_message_status") {
      if (value == "all") p.per_message_status = StatusDetail::kAll;
      else if (value == "last-only") p.per_message_status = StatusDetail::kLastOnly;
      else throw BadProfile("bad per_message_status value: " + value);
    } else if (key == "tofu") p.tofu = as_bool(value, key);
    else if (key == "notify_e2e_banner") p.notify_e2e_banner = as_bool(value, key);
    else if (key == "block_until_verified") p.block_until_verified = as_bool(value, key);
    else if (key == "reencrypt_and_resend") p.reencrypt_and_resend = as_bool(value, key);
    else if (key == "qr_fingerprint") p.qr_fingerprint = as_bool(value, key);
    else if (key == "export_fingerprint") p.export_fingerprint = as_bool(value, key);
    else if (key == "verified_check") p.verified_check = as_bool(value, key);
    else if (key == "clear_trusted_contacts") p.clear_trusted_contacts = as_bool(value, key);
    else if (key == "e2e_opt_in") p.e2e_opt_in = as_bool(value, key);
    else if (key == "encryption_irreversible") p.encryption_irreversible = as_bool(value, key);
    else if (key == "session_locked_to_keys") p.session_locked_to_keys = as_bool(value, key);
    else if (key == "history_locked_to_keys") p.history_locked_to_keys = as_bool(value, key);
    else if (key == "verification_required_event") p.verification_required_event = as_bool(value, key);
    else if (key == "two_step_verification") p.two_step_verification = as_bool(value, key);
    else if (key == "passphrase_lock") p.passphrase_lock = as_bool(value, key);
    else if (key == "screen_security") p.screen_security = as_bool(value, key);
    else throw BadProfile("unknown profile key: " + key);
  }
  if (!named) throw BadProfile("missing `profile NAME` line");
  p.validate();
  return p;
}

std::string render_profile(const PolicyProfile& p) {
  std::ostringstream out;
  auto flag = [&](const char* key, bool v) {
    if (v) out << key << " on\n";
  };
  out << "profile " << p.name << "\n";
  flag("tofu", p.tofu);
  flag("notify_e2e_banner", p.notify_e2e_banner);
  if (p.notify_key_change != Notify::kNone)
    out << "notify_key_change " << notify_name(p.notify_key_change) << "\n";
  flag("block_until_verified", p.block_until_verified);
  flag("reencrypt_and_resend", p.reencrypt_and_resend);
  if (p.per_message_status != StatusDetail::kAll)
    out << "per_message_status " << status_name(p.per_message_status) << "\n";
  flag("qr_fingerprint", p.qr_fingerprint);
  flag("export_fingerprint", p.export_fingerprint);
  flag("verified_check", p.verified_check);
  flag("clear_trusted_contacts", p.clear_trusted_contacts);
  flag("e2e_opt_in", p.e2e_opt_in);
  flag("encryption_irreversible", p.encryption_irreversible);
  flag("session_locked_to_keys", p.session_locked_to_keys);
  flag("history_locked_to_keys", p.history_locked_to_keys);
  flag("verification_required_event", p.verification_required_event);
  flag("two_step_verification", p.two_step_verification);
  flag("passphrase_lock", p.passphrase_lock);
  flag("screen_security", p.screen_security);
  return out.str();
}

Fingerprint compute_fingerprint(const CryptoSuite& suite, Element a,
                                Element b) {
  Bytes ea = CryptoSuite::encode_element(a);
  Bytes eb = CryptoSuite::encode_element(b);
  if (eb < ea) std::swap(ea, eb);  // symmetry via sorted input
  Bytes h1 = suite.hash(concat({ea, eb}));
  Bytes h2 = suite.hash(h1);
  Bytes material = concat({h1, h2});

  Fingerprint fp;
  fp.raw = h1;
  fp.qr_payload = concat({Bytes{0x01}, h1});
  for (int group = 0; group < 12; ++group) {
    std::uint64_t v = 0;
    for (int i = 0; i < 5; ++i) v = v << 8 | material[group * 5 + i];
    char buf[8];
    std::snprintf(buf, sizeof buf, "%05llu",
                  static_cast<unsigned long long>(v % 100000));
    if (group) fp.digits += ' ';
    fp.digits += buf;
  }
  return fp;
}

Client::Client(simnet::World& world, std::string name, PolicyProfile profile,
               Protocol protocol)
    : world_(world),
      name_(std::move(name)),
      profile_(std::move(profile)),
      protocol_(protocol) {
  profile_.validate();
  world_.add_actor(name_);
  identity_.owner = name_;
  identity_.ik = world_.suite().generate_keypair();
  if (protocol_ == Protocol::kSignalLike)
    x3dh::publish_bundle(world_.suite(), world_.prekey_server(), identity_,
                         prekeys_, kOpkBatch);
}

void Client::emit(const std::string& kind, const std::string& peer,
                  const std::string& detail) {
  events_.push_back(SessionEvent{world_.now(), kind, peer, detail});
}

Client::Conversation& Client::conversation(const std::string& peer) {
  return conversations_[peer];
}

void Client::learn_identity(const std::string& peer, Element ik,
                            bool key_change) {
  auto it = trust_.find(peer);
  if (it == trust_.end()) {
    trust_[peer] = TrustEntry{ik, false, 0};
    if (profile_.tofu) emit("tofu_trusted", peer);
  } else if (it->second.peer_identity != ik) {
    it->second.peer_identity = ik;
    it->second.verified = false;  // any key change drops verification
    if (key_change) it->second.key_changes += 1;
  }
}

void Client::start_conversation(const std::string& peer) {
  if (!world_.has_actor(peer)) throw NoSuchUser("unknown peer: " + peer);
  Conversation& conv = conversation(peer);
  if (conv.started) return;
  conv.started = true;
  conv.encrypted = !profile_.e2e_opt_in;
  if (protocol_ == Protocol::kSignalLike && conv.encrypted) {
    auto bundle =
        x3dh::PrekeyBundle::deserialize(world_.fetch_bundle(name_, peer));
    learn_identity(peer, bundle.ik_pub, false);
    conv.pending_bundle = std::move(bundle);
  }
  if (profile_.notify_e2e_banner && conv.encrypted) emit("e2e_banner", peer);
  if (!conv.encrypted) emit("plaintext_mode", peer);
  if (profile_.verification_required_event) emit("verification_required", peer);
}

void Client::enable_encryption(const std::string& peer) {
  if (!profile_.e2e_opt_in)
    throw AlreadyEncrypted("profile is always encrypted");
  Conversation& conv = conversation(peer);
  if (!conv.started) start_conversation(peer);
  if (conv.encrypted) return;  // idempotent
  conv.encrypted = true;
  if (protocol_ == Protocol::kSignalLike && !conv.pending_bundle) {
    auto bundle =
        x3dh::PrekeyBundle::deserialize(world_.fetch_bundle(name_, peer));
    learn_identity(peer, bundle.ik_pub, false);
    conv.pending_bundle = std::move(bundle);
  }
  if (profile_.notify_e2e_banner) emit("e2e_banner", peer);
}

void Client::disable_encryption(const std::string& peer) {
  if (!profile_.e2e_opt_in)
    throw AlreadyEncrypted("profile is always encrypted");
  Conversation& conv = conversation(peer);
  if (!conv.encrypted) return;
  if (profile_.encryption_irreversible)
    throw Irreversible("encryption cannot be disabled");
  conv.encrypted = false;
  conv.have_session = false;
}

std::uint64_t Client::send_text(const std::string& peer,
                                const std::string& text) {
  Conversation& conv = conversation(peer);
  if (!conv.started) start_conversation(peer);
  if (conv.dead)
    throw SessionDead("session keys changed; start a new conversation");

  if (conv.key_change_pending) {
    emit("key_changed", peer);  // deferred-to-next-send notification
    conv.key_change_pending = false;
  }

  OutboxEntry entry;
  entry.msg_id = next_msg_id_++;
  entry.peer = peer;
  entry.text = text;

  if (protocol_ == Protocol::kOtr) {
    if (!world_.online(peer))
      throw PeerOffline("otr requires the peer to be online");
    auto it = otr_sessions_.find(peer);
    if (it == otr_sessions_.end())
      throw NotEstablished("no otr session with " + peer);
    auto [next, msg] = otr::otr_send(world_.suite(), it->second, to_bytes(text));
    it->second = std::move(next);
    Bytes payload{kTagOtr};
    append(payload, msg.serialize());
    entry.world_ids.push_back(world_.send(name_, peer, payload, "msg"));
    entry.status = MsgStatus::kSent;
    outbox_.push_back(std::move(entry));
    return outbox_.back().msg_id;
  }

  auto trust = trust_.find(peer);
  if (profile_.block_until_verified && trust != trust_.end() &&
      trust->second.key_changes > 0 && !trust->second.verified) {
    entry.status = MsgStatus::kBlocked;
    emit("message_blocked", peer, std::to_string(entry.msg_id));
    outbox_.push_back(std::move(entry));
    return outbox_.back().msg_id;
  }

  outbox_.push_back(std::move(entry));
  transmit(outbox_.back());
  return outbox_.back().msg_id;
}

void Client::transmit(OutboxEntry& entry) {
  Conversation& conv = conversation(entry.peer);
  Bytes payload;
  if (!conv.encrypted) {
    payload.push_back(kTagPlain);
    append(payload, to_bytes(entry.text));
  } else if (!conv.have_session) {
    if (!conv.pending_bundle) {
      auto bundle = x3dh::PrekeyBundle::deserialize(
          world_.fetch_bundle(name_, entry.peer));
      learn_identity(entry.peer, bundle.ik_pub, false);
      conv.pending_bundle = std::move(bundle);
    }
    // The text rides in a ratchet envelope appended to the X3DH message, so
    // the responder performs a DH step on receipt and can reply immediately.
    auto result = x3dh::initiate(world_.suite(), identity_,
                                 *conv.pending_bundle, {});
    conv.ratchet = ratchet::init_initiator(world_.suite(), result.sk,
                                           conv.pending_bundle->spk.pub);
    auto [next, env] = ratchet::ratchet_encrypt(world_.suite(), conv.ratchet,
                                                to_bytes(entry.text), {});
    conv.ratchet = std::move(next);
    conv.have_session = true;
    conv.pending_bundle.reset();
    payload.push_back(kTagInitial);
    Bytes initial = result.message.serialize();
    put_u32(payload, static_cast<std::uint32_t>(initial.size()));
    append(payload, initial);
    append(payload, env.serialize());
  } else {
    auto [next, env] = ratchet::ratchet_encrypt(world_.suite(), conv.ratchet,
                                                to_bytes(entry.text), {});
    conv.ratchet = std::move(next);
    payload.push_back(kTagEnvelope);
    append(payload, env.serialize());
  }
  entry.world_ids.push_back(world_.send(name_, entry.peer, payload, "msg"));
  entry.status = MsgStatus::kSent;
  emit("status_changed", entry.peer, std::to_string(entry.msg_id) + ":sent");
}

void Client::poll() {
  for (const auto& d : world_.collect(name_)) {
    if (d.kind == "msg") handle_message(d);
    else if (d.kind == "receipt") handle_receipt(d);
    else if (d.kind == "rekey") handle_rekey_notice(d);
  }
}

void Client::handle_message(const simnet::Delivery& d) {
  if (d.payload.empty()) return;
  Conversation& conv = conversation(d.sender);
  std::uint8_t tag = d.payload[0];
  ByteSpan body(d.payload.data() + 1, d.payload.size() - 1);
  std::string text;
  try {
    switch (tag) {
      case kTagPlain: {
        if (!conv.started) {
          conv.started = true;
          conv.encrypted = false;
          emit("plaintext_mode", d.sender);
        }
        text = to_string(body);
        break;
      }
      case kTagInitial: {
        ByteReader br(body);
        Bytes initial = br.bytes(br.u32());
        Bytes env_wire = br.bytes(br.remaining());
        auto msg = x3dh::InitialMessage::deserialize(initial);
        auto result =
            x3dh::respond(world_.suite(), identity_, prekeys_, msg);
        bool fresh = !conv.started;
        conv.started = true;
        conv.encrypted = true;
        conv.have_session = true;
        conv.dead = false;
        conv.ratchet = ratchet::init_responder(result.sk, prekeys_.spk);
        auto env = ratchet::Envelope::deserialize(env_wire);
        auto [next, pt] =
            ratchet::ratchet_decrypt(world_.suite(), conv.ratchet, env, {});
        conv.ratchet = std::move(next);
        learn_identity(d.sender, msg.ik_a, !fresh);
        if (fresh && profile_.notify_e2e_banner) emit("e2e_banner", d.sender);
        if (fresh && profile_.verification_required_event)
          emit("verification_required", d.sender);
        text = to_string(pt);
        break;
      }
      case kTagEnvelope: {
        if (!conv.have_session) {
          emit("undecryptable", d.sender);
          return;
        }
        auto env = ratchet::Envelope::deserialize(body);
        auto [next, pt] =
            ratchet::ratchet_decrypt(world_.suite(), conv.ratchet, env, {});
        conv.ratchet = std::move(next);
        text = to_string(pt);
        break;
      }
      case kTagOtr: {
        auto it = otr_sessions_.find(d.sender);
        if (it == otr_sessions_.end()) {
          emit("undecryptable", d.sender);
          return;
        }
        auto msg = otr::OtrMessage::deserialize(body);
        auto [next, pt] = otr::otr_receive(world_.suite(), it->second, msg);
        it->second = std::move(next);
        text = to_string(pt);
        break;
      }
      default:
        emit("undecryptable", d.sender);
        return;
    }
  } catch (const Error&) {
    emit("undecryptable", d.sender);
    return;
  } catch (const std::out_of_range&) {  // truncated wire data
    emit("undecryptable", d.sender);
    return;
  }
  inbox_.emplace_back(d.sender, text);
  Bytes receipt = be64(d.id);
  receipt.push_back(kReceiptDelivered);
  world_.send(name_, d.sender, std::move(receipt), "receipt");
}

Client::OutboxEntry* Client::entry_by_world_id(std::uint64_t world_id) {
  for (auto& e : outbox_)
    if (std::find(e.world_ids.begin(), e.world_ids.end(), world_id) !=
        e.world_ids.end())
      return &e;
  return nullptr;
}

void Client::handle_receipt(const simnet::Delivery& d) {
  ByteReader r(d.payload);
  std::uint64_t world_id = r.u64();
  std::uint8_t status = r.u8();
  OutboxEntry* entry = entry_by_world_id(world_id);
  if (!entry || status != kReceiptDelivered) return;
  entry->status = MsgStatus::kDelivered;
  emit("status_changed", entry->peer,
       std::to_string(entry->msg_id) + ":delivered");
}

void Client::handle_rekey_notice(const simnet::Delivery& d) {
  Element new_ik = CryptoSuite::decode_element(d.payload);
  learn_identity(d.sender, new_ik, true);
  Conversation& conv = conversation(d.sender);
  conv.have_session = false;
  conv.pending_bundle.reset();
  otr_sessions_.erase(d.sender);
  if (profile_.session_locked_to_keys) conv.dead = true;
  if (profile_.notify_key_change == Notify::kImmediate)
    emit("key_changed", d.sender);
  else if (profile_.notify_key_change == Notify::kDeferred)
    conv.key_change_pending = true;
  if (profile_.reencrypt_and_resend && !conv.dead) {
    for (auto& entry : outbox_) {
      if (entry.peer != d.sender || entry.status != MsgStatus::kSent) continue;
      transmit(entry);  // fresh X3DH session; old ciphertext never reused
      emit("resent", d.sender, std::to_string(entry.msg_id));
    }
  }
}

MsgStatus Client::message_status(std::uint64_t msg_id) const {
  const OutboxEntry* found = nullptr;
  for (const auto& e : outbox_)
    if (e.msg_id == msg_id) found = &e;
  if (!found) throw NotTracked("unknown message id");
  if (profile_.per_message_status == StatusDetail::kLastOnly &&
      msg_id != outbox_.back().msg_id)
    throw NotTracked("only the newest message carries a status");
  return found->status;
}

Fingerprint Client::displayed_fingerprint(const std::string& peer,
                                          VerifyChannel channel) const {
  if (channel == VerifyChannel::kQr && !profile_.qr_fingerprint)
    throw Unsupported("profile has no QR fingerprint");
  if (channel == VerifyChannel::kExported && !profile_.export_fingerprint)
    throw Unsupported("profile cannot export the fingerprint");
  auto it = trust_.find(peer);
  if (it == trust_.end())
    throw NotEstablished("no identity learned for " + peer);
  return compute_fingerprint(world_.suite(), identity_.ik.pub,
                             it->second.peer_identity);
}

void Client::verify_peer(const std::string& peer, VerifyChannel channel,
                         ByteSpan peer_displayed_raw) {
  Fingerprint own = displayed_fingerprint(peer, channel);
  if (own.raw != Bytes(peer_displayed_raw.begin(), peer_displayed_raw.end()))
    throw VerificationFailed("fingerprints differ");
  trust_[peer].verified = true;
  emit("verified", peer);
  flush_blocked(peer);
}

void Client::flush_blocked(const std::string& peer) {
  for (auto& entry : outbox_) {
    if (entry.peer != peer || entry.status != MsgStatus::kBlocked) continue;
    transmit(entry);
    emit("resent", peer, std::to_string(entry.msg_id));
  }
}

bool Client::is_verified(const std::string& peer) const {
  if (!profile_.verified_check)
    throw Unsupported("profile has no verified check");
  auto it = trust_.find(peer);
  return it != trust_.end() && it->second.verified;
}

void Client::clear_trusted() {
  if (!profile_.clear_trusted_contacts)
    throw Unsupported("profile cannot clear trusted contacts");
  for (auto& [peer, entry] : trust_) entry.verified = false;
  emit("trusted_cleared", "");
}

void Client::reinstall() {
  world_.drop_queued(name_);
  std::set<std::string> peers;
  for (const auto& [peer, conv] : conversations_) peers.insert(peer);
  for (const auto& [peer, entry] : trust_) peers.insert(peer);

  conversations_.clear();
  otr_sessions_.clear();
  trust_.clear();
  outbox_.clear();
  if (profile_.history_locked_to_keys) inbox_.clear();

  identity_.ik = world_.suite().generate_keypair();
  if (protocol_ == Protocol::kSignalLike) {
    prekeys_.opks.clear();  // spk_id keeps counting across installs
    x3dh::publish_bundle(world_.suite(), world_.prekey_server(), identity_,
                         prekeys_, kOpkBatch);
  }
  emit("reinstalled", "");
  for (const auto& peer : peers)
    world_.send(name_, peer, CryptoSuite::encode_element(identity_.ik.pub),
                "rekey");
}

void Client::establish_otr(Client& a, Client& b) {
  if (!a.world_.online(a.name_) || !b.world_.online(b.name_))
    throw PeerOffline("otr key exchange needs both parties online");
  otr::OtrIdentity ia{a.name_, a.identity_.ik};
  otr::OtrIdentity ib{b.name_, b.identity_.ik};
  auto [sessions, transcript] = otr::ake_sigma_r(a.world_.suite(), ia, ib);
  a.otr_sessions_[b.name_] = std::move(sessions.first);
  b.otr_sessions_[a.name_] = std::move(sessions.second);
  a.learn_identity(b.name_, b.identity_.ik.pub, false);
  b.learn_identity(a.name_, a.identity_.ik.pub, false);
  for (Client* c : {&a, &b}) {
    const std::string& peer = (c == &a) ? b.name_ : a.name_;
    Conversation& conv = c->conversation(peer);
    conv.started = true;
    conv.encrypted = true;
    conv.have_session = true;
  }
}

otr::OtrSession& Client::otr_session(const std::string& peer) {
  auto it = otr_sessions_.find(peer);
  if (it == otr_sessions_.end())
    throw NotEstablished("no otr session with " + peer);
  return it->second;
}

}  // namespace msglab::session
