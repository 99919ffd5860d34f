#include "partfed/netsim.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace partfed::net {

const char* msg_kind_name(MsgKind k) {
    switch (k) {
        case MsgKind::announce: return "announce";
        case MsgKind::join_offer: return "join_offer";
        case MsgKind::table_bcast: return "table_bcast";
        case MsgKind::table_request: return "table_request";
        case MsgKind::update: return "update";
        case MsgKind::update_reply: return "update_reply";
        case MsgKind::fetch: return "fetch";
        case MsgKind::fetch_reply: return "fetch_reply";
        case MsgKind::replica_sync: return "replica_sync";
        case MsgKind::terminate: return "terminate";
    }
    return "unknown";
}

void TrafficLedger::on_sent(int round, AgentId a, MsgKind k, uint64_t bytes) {
    LedgerRow& r = rows_[Key{round, a}];
    r.bytes_sent += bytes;
    r.messages_sent += 1;
    sent_kind_[Key{round, a}][k] += bytes;
}

void TrafficLedger::on_received(int round, AgentId a, MsgKind k, uint64_t bytes) {
    rows_[Key{round, a}].bytes_received += bytes;
    recv_kind_[Key{round, a}][k] += bytes;
}

void TrafficLedger::on_dropped(int round, AgentId a) {
    rows_[Key{round, a}].messages_dropped += 1;
}

LedgerRow TrafficLedger::row(int round, AgentId a) const {
    auto it = rows_.find(Key{round, a});
    return it == rows_.end() ? LedgerRow{} : it->second;
}

uint64_t TrafficLedger::sent_by_kind(int round, AgentId a, MsgKind k) const {
    auto it = sent_kind_.find(Key{round, a});
    if (it == sent_kind_.end()) return 0;
    auto jt = it->second.find(k);
    return jt == it->second.end() ? 0 : jt->second;
}

uint64_t TrafficLedger::received_by_kind(int round, AgentId a, MsgKind k) const {
    auto it = recv_kind_.find(Key{round, a});
    if (it == recv_kind_.end()) return 0;
    auto jt = it->second.find(k);
    return jt == it->second.end() ? 0 : jt->second;
}

LedgerRow TrafficLedger::round_totals(int round) const {
    LedgerRow total;
    for (const auto& [key, row] : rows_) {
        if (key.round != round) continue;
        total.bytes_sent += row.bytes_sent;
        total.bytes_received += row.bytes_received;
        total.messages_sent += row.messages_sent;
        total.messages_dropped += row.messages_dropped;
    }
    return total;
}

std::vector<AgentId> TrafficLedger::agents_in_round(int round) const {
    std::vector<AgentId> out;
    for (const auto& [key, row] : rows_)
        if (key.round == round) out.push_back(key.agent);
    return out;
}

std::string trace_to_text(const std::vector<TraceEntry>& trace) {
    std::ostringstream out;
    for (const TraceEntry& e : trace)
        out << e.time_us << " " << e.src << " " << e.dst << " " << msg_kind_name(e.kind) << " "
            << e.bytes << " " << e.outcome << "\n";
    return out.str();
}

Simulator::Simulator(NetConfig cfg)
    : cfg_(std::move(cfg)), drop_prob_(cfg_.drop_prob), rng_(mix_seed(cfg_.seed, 0x6e657473)) {}

void Simulator::add_agent(AgentId id, AgentHooks hooks) {
    agents_[id] = std::move(hooks);
    removed_[id] = false;
}

void Simulator::remove_agent(AgentId id) {
    removed_[id] = true;
    unsubscribe_all(id);
}

bool Simulator::has_agent(AgentId id) const {
    auto it = removed_.find(id);
    return it != removed_.end() && !it->second;
}

void Simulator::subscribe(AgentId id, const std::string& topic) {
    auto& subs = topics_[topic];
    if (std::find(subs.begin(), subs.end(), id) == subs.end()) {
        subs.push_back(id);
        std::sort(subs.begin(), subs.end());
    }
}

void Simulator::unsubscribe_all(AgentId id) {
    for (auto& [topic, subs] : topics_) {
        auto it = std::find(subs.begin(), subs.end(), id);
        if (it != subs.end()) subs.erase(it);
    }
}

std::vector<AgentId> Simulator::subscribers(const std::string& topic) const {
    auto it = topics_.find(topic);
    return it == topics_.end() ? std::vector<AgentId>{} : it->second;
}

bool Simulator::connected(AgentId id) const {
    if (!has_agent(id)) return false;
    for (const auto& d : cfg_.disconnects)
        if (d.agent == id && round_ >= d.from_round && round_ <= d.to_round) return false;
    return true;
}

int64_t Simulator::sample_latency() {
    const int64_t lo = std::max<int64_t>(0, cfg_.latency_mean_us - cfg_.latency_jitter_us);
    const int64_t hi = cfg_.latency_mean_us + cfg_.latency_jitter_us;
    if (hi <= lo) return lo;
    return lo + static_cast<int64_t>(rng_.below(static_cast<uint64_t>(hi - lo + 1)));
}

bool Simulator::sample_drop() { return rng_.uniform01() < drop_prob_; }

void Simulator::enqueue(std::shared_ptr<Event> ev) {
    ev->seq = ++seq_counter_;
    queue_.push(std::move(ev));
}

void Simulator::dispatch(AgentId src, AgentId dst, const std::string& topic, MsgKind kind,
                         const Bytes& payload, uint64_t request_id) {
    // Disconnected senders transmit nothing at all.
    if (!connected(src)) return;

    Envelope env;
    env.seq = ++envelope_counter_;
    env.src = src;
    env.dst = dst;
    env.topic = topic;
    env.kind = kind;
    env.payload = payload;
    env.send_time_us = now_;
    env.request_id = request_id;

    // Drop and latency are always both drawn so the stream stays aligned.
    bool dropped = sample_drop();
    const int64_t latency = sample_latency();
    if (fault_filter_ && fault_filter_(env)) dropped = true;

    ledger_.on_sent(round_, src, kind, payload.size());
    if (dropped) {
        ledger_.on_dropped(round_, src);
        trace_.push_back(TraceEntry{
            now_, src, topic.empty() ? std::to_string(dst) : topic + ">" + std::to_string(dst),
            kind, payload.size(), "drop"});
        return;
    }
    env.deliver_time_us = now_ + latency;
    auto ev = std::make_shared<Event>();
    ev->time = env.deliver_time_us;
    ev->type = Event::Type::delivery;
    ev->env = std::move(env);
    enqueue(std::move(ev));
}

void Simulator::publish(AgentId src, const std::string& topic, MsgKind kind, Bytes payload) {
    // One envelope per current subscriber, independent draws; the sender
    // never receives its own publication. Unknown topics are implicitly
    // created (and deliver to nobody).
    auto& subs = topics_[topic];
    for (AgentId dst : subs) {
        if (dst == src) continue;
        dispatch(src, dst, topic, kind, payload, 0);
    }
}

void Simulator::send(AgentId src, AgentId dst, MsgKind kind, Bytes payload) {
    dispatch(src, dst, "", kind, std::move(payload), 0);
}

uint64_t Simulator::request(AgentId src, AgentId dst, MsgKind kind, Bytes payload,
                            int64_t timeout_us) {
    const uint64_t id = ++request_counter_;
    requests_[id] = PendingRequest{src, dst, kind, false, false};
    dispatch(src, dst, "", kind, payload, id);
    // timeout_us <= 0 means no timeout: the caller has its own barrier
    // (synchronous rounds settle requests at the close).
    if (timeout_us > 0) {
        auto ev = std::make_shared<Event>();
        ev->time = now_ + timeout_us;
        ev->type = Event::Type::request_timeout;
        ev->request_id = id;
        enqueue(std::move(ev));
    }
    return id;
}

void Simulator::reply(uint64_t request_id, MsgKind kind, Bytes payload) {
    auto it = requests_.find(request_id);
    if (it == requests_.end()) return;
    dispatch(it->second.dst, it->second.src, "", kind, std::move(payload), request_id);
}

bool Simulator::request_open(uint64_t request_id) const {
    auto it = requests_.find(request_id);
    return it != requests_.end() && !it->second.reply_delivered && !it->second.timed_out;
}

uint64_t Simulator::schedule_timer(AgentId id, int64_t delay_us, uint64_t tag) {
    auto ev = std::make_shared<Event>();
    ev->time = now_ + delay_us;
    ev->type = Event::Type::timer;
    ev->agent = id;
    ev->timer_id = ++timer_counter_;
    ev->tag = tag;
    const uint64_t timer_id = ev->timer_id;
    enqueue(std::move(ev));
    return timer_id;
}

void Simulator::cancel_timer(uint64_t timer_id) { cancelled_timers_[timer_id] = true; }

void Simulator::schedule_call(int64_t at_us, std::function<void()> fn) {
    auto ev = std::make_shared<Event>();
    ev->time = at_us;
    ev->type = Event::Type::call;
    ev->fn = std::move(fn);
    enqueue(std::move(ev));
}

void Simulator::process(Event& ev) {
    switch (ev.type) {
        case Event::Type::delivery: {
            Envelope& env = ev.env;
            const std::string dst_label =
                env.topic.empty() ? std::to_string(env.dst)
                                  : env.topic + ">" + std::to_string(env.dst);
            if (!has_agent(env.dst)) {
                now_ = ev.time;
                ledger_.on_dropped(round_, env.src);
                trace_.push_back(TraceEntry{ev.time, env.src, dst_label, env.kind,
                                            env.payload.size(), "drop_gone"});
                return;
            }
            if (!connected(env.dst)) {
                now_ = ev.time;
                ledger_.on_dropped(round_, env.src);
                trace_.push_back(TraceEntry{ev.time, env.src, dst_label, env.kind,
                                            env.payload.size(), "drop_disconnected"});
                return;
            }
            now_ = ev.time;
            ledger_.on_received(round_, env.dst, env.kind, env.payload.size());
            trace_.push_back(TraceEntry{ev.time, env.src, dst_label, env.kind,
                                        env.payload.size(), "deliver"});
            AgentHooks& hooks = agents_.at(env.dst);
            if (env.request_id != 0) {
                auto rit = requests_.find(env.request_id);
                if (rit != requests_.end() && env.dst == rit->second.src) {
                    // Reply leg (possibly late; the requester decides).
                    rit->second.reply_delivered = true;
                    if (hooks.on_reply) hooks.on_reply(env.request_id, &env, false);
                    return;
                }
                if (hooks.on_request) hooks.on_request(env);
                return;
            }
            if (hooks.on_message) hooks.on_message(env);
            return;
        }
        case Event::Type::request_timeout: {
            auto it = requests_.find(ev.request_id);
            if (it == requests_.end() || it->second.reply_delivered) return;  // settled; no-op
            it->second.timed_out = true;
            now_ = std::max(now_, ev.time);
            trace_.push_back(TraceEntry{ev.time, it->second.src, std::to_string(it->second.dst),
                                        it->second.kind, 0, "timeout"});
            auto ait = agents_.find(it->second.src);
            if (ait != agents_.end() && !removed_[it->second.src] && ait->second.on_reply)
                ait->second.on_reply(ev.request_id, nullptr, true);
            return;
        }
        case Event::Type::timer: {
            if (cancelled_timers_.count(ev.timer_id)) return;  // no clock advance
            now_ = ev.time;
            auto it = agents_.find(ev.agent);
            if (it != agents_.end() && !removed_[ev.agent] && it->second.on_timer)
                it->second.on_timer(ev.tag);
            return;
        }
        case Event::Type::call: {
            now_ = ev.time;
            ev.fn();
            return;
        }
    }
}

void Simulator::run_until(int64_t t_us) {
    while (!queue_.empty() && queue_.top()->time <= t_us) {
        std::shared_ptr<Event> ev = queue_.top();
        queue_.pop();
        process(*ev);
    }
    now_ = std::max(now_, t_us);
}

void Simulator::run_until_idle() {
    while (!queue_.empty()) {
        std::shared_ptr<Event> ev = queue_.top();
        queue_.pop();
        process(*ev);
    }
}

bool Simulator::idle() const { return queue_.empty(); }

LedgerRow Simulator::ledger_snapshot(int round) const {
    if (round >= round_) throw std::invalid_argument("open round");
    return ledger_.round_totals(round);
}

std::string Simulator::blob_put(const Bytes& data) {
    // FNV-1a 64-bit; implementation-pinned so runs are reproducible.
    uint64_t h = 1469598103934665603ULL;
    for (uint8_t b : data) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    char key[20];
    std::snprintf(key, sizeof(key), "%016llx", static_cast<unsigned long long>(h));
    blobs_[key] = data;
    return key;
}

const Bytes* Simulator::blob_get(const std::string& key) const {
    auto it = blobs_.find(key);
    return it == blobs_.end() ? nullptr : &it->second;
}

}  // namespace partfed::net
