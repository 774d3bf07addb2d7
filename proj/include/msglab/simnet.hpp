#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msglab/crypto.hpp"
#include "msglab/x3dh.hpp"

namespace msglab::simnet {

using crypto::CryptoSuite;

// One message in flight or delivered. `id` is assigned at send time and is
// stable across delays and reordering.
struct Delivery {
  std::uint64_t id = 0;
  std::string kind;  // "msg", "system", "receipt", ...
  std::string sender;
  std::string recipient;
  Bytes payload;
  std::uint64_t sent_tick = 0;
};

using Match = std::function<bool(const Delivery&)>;

// Interceptors run in insertion order at send time; the first drop wins,
// delays accumulate, replace rewrites the payload in place.
struct Interceptor {
  enum class Kind { kDrop, kDelay, kReorder, kReplace, kRecord };
  Kind kind;
  Match match;  // empty matches everything
  std::uint64_t delay = 0;   // kDelay: fixed extra ticks
  std::uint64_t window = 0;  // kReorder: uniform extra delay in [0, window]
  std::function<Bytes(const Delivery&)> replace;
  std::vector<Delivery>* sink = nullptr;  // kRecord: copies land here
};

// Active attacker sitting on one link. Sees and may rewrite every payload
// in both directions, including prekey-bundle fetches.
using MitmHandler = std::function<Bytes(const std::string& sender,
                                        const std::string& recipient,
                                        const std::string& kind, Bytes payload)>;

struct LogEntry {
  std::uint64_t tick = 0;
  std::uint64_t seq = 0;
  std::string event;  // "send", "deliver", "drop"
  std::string kind;
  std::string sender;
  std::string recipient;
  std::size_t bytes = 0;
};

// Discrete-event network: one virtual clock, per-recipient queues, a
// deterministic seeded RNG. Two worlds built from the same seed and driven
// by the same calls produce identical logs.
class World {
 public:
  explicit World(std::uint64_t seed);

  CryptoSuite& suite() { return suite_; }
  x3dh::PrekeyServer& prekey_server() { return server_; }
  std::mt19937_64& rng() { return rng_; }
  std::uint64_t now() const { return tick_; }

  void add_actor(const std::string& name);
  bool has_actor(const std::string& name) const;
  void set_online(const std::string& name, bool online);
  bool online(const std::string& name) const;

  // Enqueues for delivery after the base latency of one tick, subject to
  // interceptors and any link attacker. Returns the message id, or 0 if an
  // interceptor dropped it.
  std::uint64_t send(const std::string& sender, const std::string& recipient,
                     Bytes payload, const std::string& kind = "msg");

  void add_interceptor(Interceptor interceptor);
  void clear_interceptors();

  // Installs an attacker on the unordered link {a, b}.
  void set_mitm(const std::string& a, const std::string& b,
                MitmHandler handler);

  // Prekey-bundle fetch routed through the network, so a link attacker can
  // substitute keys during session setup.
  Bytes fetch_bundle(const std::string& requester, const std::string& target);

  void tick(std::uint64_t n = 1) { tick_ += n; }

  // Messages due for an online recipient, ordered by (due tick, send seq).
  // Offline recipients receive nothing; their queue keeps accumulating.
  std::vector<Delivery> collect(const std::string& name);

  // Discards everything queued for `name` (e.g. an app reinstall).
  void drop_queued(const std::string& name);

  const std::vector<LogEntry>& log() const { return log_; }

 private:
  struct Pending {
    std::uint64_t due;
    std::uint64_t seq;
    Delivery delivery;
  };

  MitmHandler* mitm_for(const std::string& a, const std::string& b);
  void log_event(const std::string& event, const Delivery& d);

  std::uint64_t tick_ = 0;
  std::uint64_t next_seq_ = 1;
  CryptoSuite suite_;
  x3dh::PrekeyServer server_;
  std::mt19937_64 rng_;
  std::map<std::string, bool> actors_;  // name -> online
  std::map<std::string, std::vector<Pending>> queues_;
  std::vector<Interceptor> interceptors_;
  std::map<std::pair<std::string, std::string>, MitmHandler> mitm_;
  std::vector<LogEntry> log_;
};

}  // namespace msglab::simnet
