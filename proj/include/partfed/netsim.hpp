#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "partfed/rng.hpp"

namespace partfed::net {

using AgentId = uint32_t;
using Bytes = std::vector<uint8_t>;

enum class MsgKind : uint8_t {
    announce = 1,
    join_offer = 2,
    table_bcast = 3,
    table_request = 4,
    update = 5,
    update_reply = 6,
    fetch = 7,
    fetch_reply = 8,
    replica_sync = 9,
    terminate = 10,
};

const char* msg_kind_name(MsgKind k);

struct NetConfig {
    int64_t latency_mean_us = 0;
    int64_t latency_jitter_us = 0;
    double drop_prob = 0.0;
    uint64_t seed = 0;
    struct Disconnect {
        AgentId agent = 0;
        int from_round = 0;
        int to_round = 0;
        bool with_memory = true;
    };
    std::vector<Disconnect> disconnects;
};

struct Envelope {
    uint64_t seq = 0;
    AgentId src = 0;
    AgentId dst = 0;
    std::string topic;  // empty for direct messages
    MsgKind kind{};
    Bytes payload;
    int64_t send_time_us = 0;
    int64_t deliver_time_us = 0;
    bool dropped = false;
    uint64_t request_id = 0;  // nonzero when part of a request/reply pair
};

struct LedgerRow {
    uint64_t bytes_sent = 0;
    uint64_t bytes_received = 0;
    uint64_t messages_sent = 0;
    uint64_t messages_dropped = 0;
};

// Per-(round, agent) traffic accounting from exact envelope payload sizes.
// bytes_sent includes dropped messages, bytes_received does not. Byte
// counts are additionally broken down by message kind so protocol traffic
// classes (updates vs replies vs replica sync vs load fetches) can be
// bounded separately.
class TrafficLedger {
public:
    void on_sent(int round, AgentId a, MsgKind k, uint64_t bytes);
    void on_received(int round, AgentId a, MsgKind k, uint64_t bytes);
    void on_dropped(int round, AgentId a);

    LedgerRow row(int round, AgentId a) const;
    uint64_t sent_by_kind(int round, AgentId a, MsgKind k) const;
    uint64_t received_by_kind(int round, AgentId a, MsgKind k) const;
    LedgerRow round_totals(int round) const;
    std::vector<AgentId> agents_in_round(int round) const;

private:
    struct Key {
        int round;
        AgentId agent;
        bool operator<(const Key& o) const {
            return round != o.round ? round < o.round : agent < o.agent;
        }
    };
    std::map<Key, LedgerRow> rows_;
    std::map<Key, std::map<MsgKind, uint64_t>> sent_kind_;
    std::map<Key, std::map<MsgKind, uint64_t>> recv_kind_;
};

struct TraceEntry {
    int64_t time_us = 0;
    AgentId src = 0;
    std::string dst;  // agent id or topic
    MsgKind kind{};
    uint64_t bytes = 0;
    std::string outcome;  // deliver | drop | drop_disconnected | drop_gone | timeout
};

std::string trace_to_text(const std::vector<TraceEntry>& trace);

struct AgentHooks {
    // Topic deliveries and one-way direct messages.
    std::function<void(const Envelope&)> on_message;
    // Request deliveries; the handler replies now or later via reply().
    std::function<void(const Envelope&)> on_request;
    // Reply delivery (env != nullptr) or request timeout (env == nullptr).
    std::function<void(uint64_t request_id, const Envelope* env, bool timed_out)> on_reply;
    std::function<void(uint64_t tag)> on_timer;
};

// Deterministic discrete-event simulator: integer-microsecond clock, event
// ties broken by a global enqueue sequence number, all randomness from the
// config seed. Single-threaded; agents interact only through it.
class Simulator {
public:
    explicit Simulator(NetConfig cfg);

    void add_agent(AgentId id, AgentHooks hooks);
    void remove_agent(AgentId id);  // departed for good
    bool has_agent(AgentId id) const;
    void subscribe(AgentId id, const std::string& topic);
    void unsubscribe_all(AgentId id);
    std::vector<AgentId> subscribers(const std::string& topic) const;

    void publish(AgentId src, const std::string& topic, MsgKind kind, Bytes payload);
    void send(AgentId src, AgentId dst, MsgKind kind, Bytes payload);
    uint64_t request(AgentId src, AgentId dst, MsgKind kind, Bytes payload, int64_t timeout_us);
    void reply(uint64_t request_id, MsgKind kind, Bytes payload);
    bool request_open(uint64_t request_id) const;

    uint64_t schedule_timer(AgentId id, int64_t delay_us, uint64_t tag);
    void cancel_timer(uint64_t timer_id);
    void schedule_call(int64_t at_us, std::function<void()> fn);

    // Runs the event queue in (time, seq) order up to and including t.
    void run_until(int64_t t_us);
    // Drains everything currently queued (cancelled timers and settled
    // request timeouts do not advance the clock).
    void run_until_idle();
    bool idle() const;
    int64_t now() const { return now_; }

    void set_round(int r) { round_ = r; }
    int round() const { return round_; }
    bool connected(AgentId id) const;

    // Temporarily overrides the configured drop probability (the harness
    // disables loss during the membership handshake).
    void set_drop_prob(double p) { drop_prob_ = p; }
    double drop_prob() const { return drop_prob_; }

    TrafficLedger& ledger() { return ledger_; }
    const TrafficLedger& ledger() const { return ledger_; }
    // Per-round totals for a closed round; rounds at or past the current one
    // are still accumulating.
    LedgerRow ledger_snapshot(int round) const;
    const std::vector<TraceEntry>& trace() const { return trace_; }

    // Reliable in-simulator blob store keyed by content hash (the durable
    // drop-box used by the leave handoff).
    std::string blob_put(const Bytes& data);
    const Bytes* blob_get(const std::string& key) const;

    // Test hook: force-drop matching envelopes.
    void set_fault_filter(std::function<bool(const Envelope&)> f) { fault_filter_ = std::move(f); }

private:
    struct Event {
        int64_t time = 0;
        uint64_t seq = 0;
        enum class Type { delivery, request_timeout, timer, call } type = Type::delivery;
        Envelope env;             // delivery
        uint64_t request_id = 0;  // request_timeout
        AgentId agent = 0;        // timer
        uint64_t timer_id = 0;    // timer
        uint64_t tag = 0;         // timer
        std::function<void()> fn;  // call
    };
    struct EventOrder {
        bool operator()(const std::shared_ptr<Event>& a, const std::shared_ptr<Event>& b) const {
            return a->time != b->time ? a->time > b->time : a->seq > b->seq;
        }
    };

    struct PendingRequest {
        AgentId src = 0;
        AgentId dst = 0;
        MsgKind kind{};
        bool reply_delivered = false;
        bool timed_out = false;
    };

    int64_t sample_latency();
    bool sample_drop();
    void dispatch(AgentId src, AgentId dst, const std::string& topic, MsgKind kind,
                  const Bytes& payload, uint64_t request_id);
    void process(Event& ev);
    void enqueue(std::shared_ptr<Event> ev);

    NetConfig cfg_;
    double drop_prob_ = 0.0;
    Rng rng_;
    int64_t now_ = 0;
    int round_ = 0;
    uint64_t seq_counter_ = 0;
    uint64_t envelope_counter_ = 0;
    uint64_t request_counter_ = 0;
    uint64_t timer_counter_ = 0;
    std::priority_queue<std::shared_ptr<Event>, std::vector<std::shared_ptr<Event>>, EventOrder>
        queue_;
    std::map<AgentId, AgentHooks> agents_;
    std::map<AgentId, bool> removed_;
    std::map<std::string, std::vector<AgentId>> topics_;
    std::unordered_map<uint64_t, PendingRequest> requests_;
    std::unordered_map<uint64_t, bool> cancelled_timers_;
    TrafficLedger ledger_;
    std::vector<TraceEntry> trace_;
    std::map<std::string, Bytes> blobs_;
    std::function<bool(const Envelope&)> fault_filter_;
};

}  // namespace partfed::net
