#include "msglab/simnet.hpp"

#include <algorithm>

namespace msglab::simnet {

namespace {

Bytes seed_bytes(std::uint64_t seed) {
  Bytes b = to_bytes("simnet-world-");
  append(b, be64(seed));
  return b;
}

}  // namespace

World::World(std::uint64_t seed) : suite_(seed_bytes(seed)), rng_(seed) {}

void World::add_actor(const std::string& name) {
  if (actors_.contains(name)) throw DuplicateUser("actor exists: " + name);
  actors_[name] = true;
}

bool World::has_actor(const std::string& name) const {
  return actors_.contains(name);
}

void World::set_online(const std::string& name, bool online) {
  if (!actors_.contains(name)) throw NoSuchUser("unknown actor: " + name);
  actors_[name] = online;
}

bool World::online(const std::string& name) const {
  auto it = actors_.find(name);
  if (it == actors_.end()) throw NoSuchUser("unknown actor: " + name);
  return it->second;
}

MitmHandler* World::mitm_for(const std::string& a, const std::string& b) {
  auto key = std::minmax(a, b);
  auto it = mitm_.find({key.first, key.second});
  return it == mitm_.end() ? nullptr : &it->second;
}

void World::log_event(const std::string& event, const Delivery& d) {
  log_.push_back(LogEntry{tick_, next_seq_++, event, d.kind, d.sender,
                          d.recipient, d.payload.size()});
}

std::uint64_t World::send(const std::string& sender,
                          const std::string& recipient, Bytes payload,
                          const std::string& kind) {
  if (!actors_.contains(sender)) throw NoSuchUser("unknown sender: " + sender);
  if (!actors_.contains(recipient))
    throw NoSuchUser("unknown recipient: " + recipient);

  Delivery d;
  d.id = next_seq_;  // seq numbers double as globally unique message ids
  d.kind = kind;
  d.sender = sender;
  d.recipient = recipient;
  d.payload = std::move(payload);
  d.sent_tick = tick_;

  if (MitmHandler* h = mitm_for(sender, recipient))
    d.payload = (*h)(sender, recipient, kind, std::move(d.payload));

  std::uint64_t extra_delay = 0;
  for (const auto& ic : interceptors_) {
    if (ic.match && !ic.match(d)) continue;
    switch (ic.kind) {
      case Interceptor::Kind::kDrop:
        log_event("drop", d);
        return 0;
      case Interceptor::Kind::kDelay:
        extra_delay += ic.delay;
        break;
      case Interceptor::Kind::kReorder:
        extra_delay += std::uniform_int_distribution<std::uint64_t>(
            0, ic.window)(rng_);
        break;
      case Interceptor::Kind::kReplace:
        d.payload = ic.replace(d);
        break;
      case Interceptor::Kind::kRecord:
        if (ic.sink) ic.sink->push_back(d);
        break;
    }
  }

  log_event("send", d);
  std::uint64_t seq = next_seq_++;
  queues_[recipient].push_back(Pending{tick_ + 1 + extra_delay, seq, d});
  return d.id;
}

void World::add_interceptor(Interceptor interceptor) {
  interceptors_.push_back(std::move(interceptor));
}

void World::clear_interceptors() { interceptors_.clear(); }

void World::set_mitm(const std::string& a, const std::string& b,
                     MitmHandler handler) {
  auto key = std::minmax(a, b);
  mitm_[{key.first, key.second}] = std::move(handler);
}

Bytes World::fetch_bundle(const std::string& requester,
                          const std::string& target) {
  Bytes wire = server_.fetch(target).serialize();
  if (MitmHandler* h = mitm_for(requester, target))
    wire = (*h)(target, requester, "bundle", std::move(wire));
  return wire;
}

std::vector<Delivery> World::collect(const std::string& name) {
  if (!online(name)) return {};
  auto& queue = queues_[name];
  std::vector<Pending> due, rest;
  for (auto& p : queue)
    (p.due <= tick_ ? due : rest).push_back(std::move(p));
  queue = std::move(rest);
  std::sort(due.begin(), due.end(), [](const Pending& a, const Pending& b) {
    return std::tie(a.due, a.seq) < std::tie(b.due, b.seq);
  });
  std::vector<Delivery> out;
  for (auto& p : due) {
    log_event("deliver", p.delivery);
    out.push_back(std::move(p.delivery));
  }
  return out;
}

void World::drop_queued(const std::string& name) { queues_[name].clear(); }

}  // namespace msglab::simnet
