#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "msglab/otr.hpp"
#include "msglab/ratchet.hpp"
#include "msglab/simnet.hpp"
#include "msglab/x3dh.hpp"

namespace msglab::session {

using crypto::CryptoSuite;
using crypto::Element;

enum class Notify { kNone, kImmediate, kDeferred };
enum class StatusDetail { kLastOnly, kAll };
enum class Protocol { kSignalLike, kOtr };
enum class VerifyChannel { kInPerson, kQr, kExported };

// Observable behavior of one emulated messenger, as declarative flags.
struct PolicyProfile {
  std::string name;
  bool tofu = false;
  bool notify_e2e_banner = false;
  Notify notify_key_change = Notify::kNone;
  bool block_until_verified = false;
  bool reencrypt_and_resend = false;
  StatusDetail per_message_status = StatusDetail::kAll;
  bool qr_fingerprint = false;
  bool export_fingerprint = false;
  bool verified_check = false;
  bool clear_trusted_contacts = false;
  bool e2e_opt_in = false;
  bool encryption_irreversible = false;
  bool session_locked_to_keys = false;
  bool history_locked_to_keys = false;
  bool verification_required_event = false;
  // Static capabilities: reported, never executed.
  bool two_step_verification = false;
  bool passphrase_lock = false;
  bool screen_security = false;

  void validate() const;  // throws BadProfile on inconsistent flag sets
};

std::vector<std::string> builtin_profile_names();
PolicyProfile builtin_profile(const std::string& name);  // throws BadProfile

// Declarative config: `profile NAME` then one `key value` line per flag.
PolicyProfile parse_profile(std::string_view text);
std::string render_profile(const PolicyProfile& profile);

// Human-comparable digest over both identity keys. Symmetric in (a, b).
struct Fingerprint {
  std::string digits;  // 60 decimal digits, 12 groups of 5
  Bytes raw;
  Bytes qr_payload;  // version byte || raw
};

Fingerprint compute_fingerprint(const CryptoSuite& suite, Element a, Element b);

struct TrustEntry {
  Element peer_identity = 0;
  bool verified = false;
  std::uint32_t key_changes = 0;
};

struct SessionEvent {
  std::uint64_t tick = 0;
  std::string kind;  // tofu_trusted | e2e_banner | key_changed | ...
  std::string peer;
  std::string detail;
};

enum class MsgStatus { kBlocked, kSent, kDelivered };

// One user's messenger state: conversations keyed by peer name. Emits
// SessionEvents; scenarios read nothing else.
class Client {
 public:
  Client(simnet::World& world, std::string name, PolicyProfile profile,
         Protocol protocol = Protocol::kSignalLike);

  const std::string& user() const { return name_; }
  const PolicyProfile& profile() const { return profile_; }
  Protocol protocol() const { return protocol_; }
  Element identity_pub() const { return identity_.ik.pub; }

  // Learns the peer's identity (TOFU) and emits the profile's initiation
  // events. Conversations are keyed by peer name.
  void start_conversation(const std::string& peer);

  void enable_encryption(const std::string& peer);   // AlreadyEncrypted
  void disable_encryption(const std::string& peer);  // Irreversible

  // Returns a client-side message id, stable across resends.
  std::uint64_t send_text(const std::string& peer, const std::string& text);

  // Drains the network queue: messages, receipts, key-change notices.
  void poll();

  MsgStatus message_status(std::uint64_t msg_id) const;  // NotTracked

  Fingerprint displayed_fingerprint(const std::string& peer,
                                    VerifyChannel channel) const;
  // Compares this side's fingerprint with the one the peer displayed.
  void verify_peer(const std::string& peer, VerifyChannel channel,
                   ByteSpan peer_displayed_raw);
  bool is_verified(const std::string& peer) const;  // Unsupported
  void clear_trusted();                             // Unsupported

  // Wipes all keys and sessions, adopts a fresh identity, republishes,
  // and notifies peers over the network.
  void reinstall();

  const std::vector<SessionEvent>& events() const { return events_; }
  const std::vector<std::pair<std::string, std::string>>& inbox() const {
    return inbox_;
  }

  // OTR only: both parties run the key exchange; both must be online.
  static void establish_otr(Client& a, Client& b);
  otr::OtrSession& otr_session(const std::string& peer);

 private:
  struct Conversation {
    bool started = false;
    bool encrypted = false;
    bool have_session = false;
    bool dead = false;
    bool key_change_pending = false;  // deferred notification due
    ratchet::RatchetState ratchet;
    std::optional<x3dh::PrekeyBundle> pending_bundle;  // fetched at start
  };

  struct OutboxEntry {
    std::uint64_t msg_id = 0;
    std::string peer;
    std::string text;
    MsgStatus status = MsgStatus::kSent;
    std::vector<std::uint64_t> world_ids;  // grows on resend
  };

  void emit(const std::string& kind, const std::string& peer,
            const std::string& detail = "");
  Conversation& conversation(const std::string& peer);
  void learn_identity(const std::string& peer, Element ik, bool key_change);
  void transmit(OutboxEntry& entry);  // encrypts and hands to the network
  void handle_message(const simnet::Delivery& d);
  void handle_receipt(const simnet::Delivery& d);
  void handle_rekey_notice(const simnet::Delivery& d);
  void flush_blocked(const std::string& peer);
  OutboxEntry* entry_by_world_id(std::uint64_t world_id);

  simnet::World& world_;
  std::string name_;
  PolicyProfile profile_;
  Protocol protocol_;
  x3dh::IdentityKeys identity_;
  x3dh::PrekeyPrivateStore prekeys_;
  std::map<std::string, Conversation> conversations_;
  std::map<std::string, TrustEntry> trust_;
  std::map<std::string, otr::OtrSession> otr_sessions_;
  std::vector<OutboxEntry> outbox_;
  std::uint64_t next_msg_id_ = 1;
  std::vector<SessionEvent> events_;
  std::vector<std::pair<std::string, std::string>> inbox_;  // (peer, text)
};

}  // namespace msglab::session
