#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "partfed/model.hpp"
#include "partfed/netsim.hpp"
#include "partfed/partition.hpp"
#include "partfed/wire.hpp"

namespace partfed {

enum class SyncMode { synchronous, asynchronous };
enum class EpsilonMode { ema, fixed_inverse_r };
enum class AgentMode { holder, trainer_only };

struct AgentConfig {
    ModelSpec model;
    TrainConfig train;
    int K = 1;
    int pi = 1;
    int rho = 1;
    double alpha = 0.5;
    EpsilonMode epsilon_mode = EpsilonMode::ema;
    int64_t round_timeout_us = 100000;
    int64_t fetch_timeout_us = 20000;
    int64_t init_timeout_us = 50000;
    uint64_t storage_offer = UINT64_MAX;
    int table_retry_budget = 3;
};

struct AgentRoundStats {
    uint64_t update_elements_sent = 0;
    uint64_t reply_elements_received = 0;
    uint64_t fetches_sent = 0;
    uint64_t updates_ignored = 0;
    uint64_t sync_ignored = 0;
    bool trained = false;
    bool skipped = false;  // view incomplete after the fetch retry budget
};

// delta = before - after, sliced into K sub-vectors (gradient-like sign:
// aggregation subtracts epsilon * delta).
std::vector<SubVector> compute_delta(const FlatWeights& before, const FlatWeights& after, int K);

// One participant: an event-driven state machine owning its dataset shard,
// its partition replica values, per-partition epsilon factors, and the local
// copy of the partition table. It never blocks; the round controller calls
// begin_round / publish_replica_sync / close_round, everything else reacts
// to delivered messages and timers.
class Agent {
public:
    Agent(net::AgentId id, AgentConfig cfg, DatasetShard shard, net::Simulator& sim,
          bool initiator);

    net::AgentHooks hooks();

    // Membership handshake. The initiator announces and collects offers
    // until its timer fires; joiners respond with their storage offer and
    // adopt the broadcast table.
    void start_init();
    bool init_done() const { return init_done_; }
    bool aborted() const { return aborted_; }

    // Round phases, driven by the controller.
    void begin_round(int r);
    void publish_replica_sync(int r);
    void close_round(int r);

    // Reconnection at the start of round r after missing missed_rounds
    // rounds. With memory the agent keeps weights and epsilon and re-syncs
    // replicas from co-holders; memoryless it restarts its local weights and
    // epsilon from scratch first. Either way every partition is refreshed
    // before training resumes.
    void on_reconnect(int r, int missed_rounds, bool with_memory);

    // Leave protocol: persists solely-held partitions to the object store,
    // broadcasts the handoff, returns the plan. The caller removes the agent
    // from the network afterwards.
    registry::HandoffPlan terminate_now();

    // The ep-weighted aggregation step for one held partition over a
    // deduplicated contribution set (ascending sender order).
    void apply_aggregate(int k, const std::map<net::AgentId, std::vector<double>>& received);

    // Assembled model view from held sub-vectors plus cache; throws
    // "partition unavailable" when some partition has no local value yet.
    FlatWeights current_view() const;

    // State injection for tests and tools.
    void set_global_subvector(int k, std::vector<double> values);
    void set_epsilon(int k, double eps);

    net::AgentId id() const { return id_; }
    AgentMode mode() const { return mode_; }
    const registry::PartitionTable& table() const { return table_; }
    const std::vector<int>& held() const { return held_; }
    const std::map<int, std::vector<double>>& global_subvectors() const { return global_sub_; }
    const std::map<int, double>& epsilon() const { return epsilon_; }
    bool holds(int k) const;
    const AgentRoundStats& round_stats(int r) const;
    int round() const { return round_; }
    const DatasetShard& shard() const { return shard_; }
    const AgentConfig& config() const { return cfg_; }

private:
    enum TimerTag : uint64_t { kOfferDeadline = 1, kTableWait = 2 };

    struct PendingUpdate {
        int k = 0;
        net::AgentId dst = 0;
        net::Bytes payload;
    };
    struct PendingFetch {
        int k = 0;
        bool refresh_held = false;
    };
    struct CacheEntry {
        std::vector<double> values;
        int round = -1;
    };

    void handle_message(const net::Envelope& env);
    void handle_request(const net::Envelope& env);
    void handle_reply(uint64_t request_id, const net::Envelope* env, bool timed_out);
    void handle_timer(uint64_t tag);

    void adopt_table(const wire::TableBroadcast& msg);
    void build_and_broadcast_table();
    void start_fetch(int k, bool refresh_held);
    void fetch_failed(int k);
    void maybe_train();
    void train_and_send();
    net::AgentId pick_holder(int k, const std::set<net::AgentId>& exclude) const;
    AgentRoundStats& stats(int r);
    std::string topic_name(int k) const;
    void refresh_held_from_table();

    net::AgentId id_;
    AgentConfig cfg_;
    DatasetShard shard_;
    net::Simulator& sim_;
    bool initiator_;

    registry::PartitionTable table_;
    std::vector<int> held_;
    AgentMode mode_ = AgentMode::trainer_only;
    std::map<int, std::vector<double>> global_sub_;
    std::map<int, CacheEntry> cache_;
    std::map<int, double> epsilon_;
    int round_ = 0;

    // Current round's aggregation state.
    std::map<int, std::map<net::AgentId, std::vector<double>>> pending_;
    std::map<int, std::map<net::AgentId, std::vector<double>>> own_received_;
    std::map<int, std::vector<uint64_t>> to_reply_;

    // In-flight requests.
    std::map<uint64_t, PendingUpdate> outstanding_updates_;
    std::map<uint64_t, PendingFetch> outstanding_fetches_;
    std::set<int> fetching_;
    std::map<int, std::set<net::AgentId>> fetch_tried_;
    bool refreshing_ = false;
    bool skip_round_ = false;

    // Init handshake state.
    bool init_done_ = false;
    bool aborted_ = false;
    std::vector<wire::JoinOffer> offers_;  // initiator, arrival order
    net::AgentId initiator_id_ = 0;
    net::Bytes table_payload_;  // initiator keeps it for re-requests
    uint64_t table_wait_timer_ = 0;
    int table_retries_ = 0;

    std::map<int, AgentRoundStats> stats_;
};

}  // namespace partfed
