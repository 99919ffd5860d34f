#include "partfed/agent.hpp"

#include <algorithm>
#include <stdexcept>

#include "partfed/rng.hpp"

namespace partfed {

using net::AgentId;
using net::Envelope;
using net::MsgKind;

std::vector<SubVector> compute_delta(const FlatWeights& before, const FlatWeights& after, int K) {
    if (before.size() != after.size()) throw std::invalid_argument("length mismatch");
    FlatWeights delta(before.size());
    for (std::size_t i = 0; i < before.size(); ++i) delta[i] = before[i] - after[i];
    return slice(delta, K);
}

Agent::Agent(AgentId id, AgentConfig cfg, DatasetShard shard, net::Simulator& sim, bool initiator)
    : id_(id), cfg_(std::move(cfg)), shard_(std::move(shard)), sim_(sim), initiator_(initiator) {
    cfg_.model.validate();
    if (initiator_) initiator_id_ = id_;
}

net::AgentHooks Agent::hooks() {
    net::AgentHooks h;
    h.on_message = [this](const Envelope& env) { handle_message(env); };
    h.on_request = [this](const Envelope& env) { handle_request(env); };
    h.on_reply = [this](uint64_t id, const Envelope* env, bool timed_out) {
        handle_reply(id, env, timed_out);
    };
    h.on_timer = [this](uint64_t tag) { handle_timer(tag); };
    return h;
}

std::string Agent::topic_name(int k) const { return "partition-" + std::to_string(k); }

bool Agent::holds(int k) const {
    return std::binary_search(held_.begin(), held_.end(), k);
}

AgentRoundStats& Agent::stats(int r) { return stats_[r]; }

const AgentRoundStats& Agent::round_stats(int r) const {
    static const AgentRoundStats empty{};
    auto it = stats_.find(r);
    return it == stats_.end() ? empty : it->second;
}

// ---------------------------------------------------------------------------
// Init handshake

void Agent::start_init() {
    if (!initiator_) return;  // joiners wait for the announce
    wire::Announce a;
    a.initiator = id_;
    a.layer_sizes = cfg_.model.layer_sizes;
    a.loss_kind = 0;
    a.optimizer_tag = 0;
    a.model_seed = cfg_.model.seed;
    a.partitions = static_cast<uint32_t>(cfg_.K);
    a.pi = static_cast<uint32_t>(cfg_.pi);
    a.rho = static_cast<uint32_t>(cfg_.rho);
    a.alpha = cfg_.alpha;
    sim_.publish(id_, "membership", MsgKind::announce, wire::encode(a));
    sim_.schedule_timer(id_, cfg_.init_timeout_us, kOfferDeadline);
}

void Agent::build_and_broadcast_table() {
    registry::PartitionTable table = registry::bootstrap(cfg_.K, cfg_.pi, cfg_.rho, id_);
    std::vector<uint32_t> trainer_only;

    // Storage gate: an offer below pi partitions' worth of bytes joins as
    // trainer-only. Partition size is the largest slice.
    const std::size_t total = cfg_.model.param_count();
    const uint64_t slice_bytes =
        8 * ((total + static_cast<std::size_t>(cfg_.K) - 1) / static_cast<std::size_t>(cfg_.K));
    const uint64_t gate = static_cast<uint64_t>(cfg_.pi) * slice_bytes;

    for (const wire::JoinOffer& offer : offers_) {
        if (table.has_agent(offer.agent)) continue;  // duplicate offer
        if (offer.storage_bytes < gate) {
            trainer_only.push_back(offer.agent);
            continue;
        }
        registry::JoinOutcome out = registry::join(table, offer.agent);
        if (out.result.assigned.empty())
            trainer_only.push_back(offer.agent);
        else
            table = std::move(out.table);
    }

    wire::TableBroadcast bcast;
    bcast.initiator = id_;
    bcast.table_text = table.to_text();
    bcast.trainer_only = trainer_only;
    table_payload_ = wire::encode(bcast);
    sim_.publish(id_, "membership", MsgKind::table_bcast, table_payload_);
    adopt_table(bcast);
}

void Agent::adopt_table(const wire::TableBroadcast& msg) {
    table_ = registry::PartitionTable::from_text(msg.table_text);
    initiator_id_ = msg.initiator;
    refresh_held_from_table();
    const FlatWeights w0 = init_weights(cfg_.model);
    const auto parts = slice(w0, cfg_.K);
    for (int k : held_)
        global_sub_[k] = parts[static_cast<std::size_t>(k - 1)].values;
    for (int k : held_) sim_.subscribe(id_, topic_name(k));
    init_done_ = true;
    if (table_wait_timer_ != 0) {
        sim_.cancel_timer(table_wait_timer_);
        table_wait_timer_ = 0;
    }
}

void Agent::refresh_held_from_table() {
    auto it = table_.held.find(id_);
    held_ = it == table_.held.end() ? std::vector<int>{} : it->second;
    mode_ = held_.empty() ? AgentMode::trainer_only : AgentMode::holder;
}

// ---------------------------------------------------------------------------
// Round phases

void Agent::begin_round(int r) {
    if (!init_done_ || aborted_) return;
    round_ = r;
    stats(r);
    skip_round_ = false;
    outstanding_updates_.clear();
    fetch_tried_.clear();
    if (!refreshing_) {
        fetching_.clear();
        outstanding_fetches_.clear();
        for (int k = 1; k <= cfg_.K; ++k)
            if (!holds(k) && !cache_.count(k)) start_fetch(k, false);
    }
    maybe_train();
}

void Agent::start_fetch(int k, bool refresh_held) {
    fetching_.insert(k);
    const AgentId dst = pick_holder(k, fetch_tried_[k]);
    if (dst == 0) {
        fetch_failed(k);
        return;
    }
    fetch_tried_[k].insert(dst);
    wire::FetchMsg msg{id_, static_cast<uint32_t>(round_), static_cast<uint32_t>(k)};
    const uint64_t req =
        sim_.request(id_, dst, MsgKind::fetch, wire::encode(msg), cfg_.fetch_timeout_us);
    outstanding_fetches_[req] = PendingFetch{k, refresh_held};
    stats(round_).fetches_sent += 1;
}

AgentId Agent::pick_holder(int k, const std::set<AgentId>& exclude) const {
    auto it = table_.holders.find(k);
    if (it == table_.holders.end()) return 0;
    AgentId best = 0;
    std::size_t best_load = 0;
    for (AgentId a : it->second) {
        if (a == id_ || exclude.count(a)) continue;
        const std::size_t load = table_.held.at(a).size();
        if (best == 0 || load < best_load || (load == best_load && a < best)) {
            best = a;
            best_load = load;
        }
    }
    return best;
}

void Agent::fetch_failed(int k) {
    fetching_.erase(k);
    // A stale or held value keeps the round alive; with nothing at all the
    // partition is unavailable and this round is skipped.
    if (!holds(k) && !cache_.count(k)) {
        skip_round_ = true;
        stats(round_).skipped = true;
    }
    maybe_train();
}

void Agent::maybe_train() {
    if (!fetching_.empty()) return;
    refreshing_ = false;
    if (skip_round_) return;
    if (stats(round_).trained) return;
    train_and_send();
}

void Agent::train_and_send() {
    const FlatWeights view = current_view();
    TrainConfig tc = cfg_.train;
    tc.seed = mix_seed(cfg_.train.seed, id_, static_cast<uint64_t>(round_));
    const FlatWeights trained = sgd_fit(cfg_.model, view, shard_, tc);
    const std::vector<SubVector> deltas = compute_delta(view, trained, cfg_.K);

    for (const SubVector& sv : deltas) {
        const int k = sv.partition_id;
        if (holds(k)) {
            // Self always counts as exactly one contribution.
            own_received_[k][id_] = sv.values;
            pending_[k][id_] = sv.values;
            continue;
        }
        const AgentId dst = pick_holder(k, {});
        if (dst == 0) continue;
        wire::UpdateMsg msg;
        msg.sender = id_;
        msg.round = static_cast<uint32_t>(round_);
        msg.partition_id = static_cast<uint32_t>(k);
        msg.delta = sv.values;
        net::Bytes payload = wire::encode(msg);
        const uint64_t req =
            sim_.request(id_, dst, MsgKind::update, payload, cfg_.round_timeout_us);
        outstanding_updates_[req] = PendingUpdate{k, dst, std::move(payload)};
        stats(round_).update_elements_sent += sv.values.size();
    }
    stats(round_).trained = true;
}

void Agent::publish_replica_sync(int r) {
    if (!init_done_ || aborted_) return;
    for (int k : held_) {
        auto it = own_received_.find(k);
        if (it == own_received_.end() || it->second.empty()) continue;
        wire::ReplicaSyncMsg msg;
        msg.origin = id_;
        msg.round = static_cast<uint32_t>(r);
        msg.partition_id = static_cast<uint32_t>(k);
        for (const auto& [sender, delta] : it->second) msg.contributions.emplace_back(sender, delta);
        sim_.publish(id_, topic_name(k), MsgKind::replica_sync, wire::encode(msg));
    }
}

void Agent::apply_aggregate(int k, const std::map<AgentId, std::vector<double>>& received) {
    if (!holds(k)) throw std::invalid_argument("not a holder of this partition");
    const std::size_t r_count = received.size();
    if (r_count == 0) return;  // no contributions this round

    double eps;
    if (cfg_.epsilon_mode == EpsilonMode::fixed_inverse_r) {
        eps = 1.0 / static_cast<double>(r_count);
    } else if (!epsilon_.count(k)) {
        eps = 1.0 / static_cast<double>(r_count);  // first aggregation bootstraps epsilon
    } else {
        eps = cfg_.alpha * epsilon_[k] + (1.0 - cfg_.alpha) / static_cast<double>(r_count);
    }
    epsilon_[k] = eps;

    std::vector<double>& w = global_sub_.at(k);
    std::vector<double> sum(w.size(), 0.0);
    for (const auto& [sender, delta] : received) {  // ascending sender id
        if (delta.size() != w.size()) continue;
        for (std::size_t i = 0; i < w.size(); ++i) sum[i] += delta[i];
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eps * sum[i];
}

void Agent::close_round(int r) {
    if (!init_done_ || aborted_) return;
    for (int k : held_) {
        auto it = pending_.find(k);
        if (it != pending_.end()) apply_aggregate(k, it->second);
    }
    for (int k : held_) {
        auto it = to_reply_.find(k);
        if (it == to_reply_.end()) continue;
        for (uint64_t req : it->second) {
            wire::ReplyMsg msg;
            msg.responder = id_;
            msg.round = static_cast<uint32_t>(r);
            msg.partition_id = static_cast<uint32_t>(k);
            msg.values = global_sub_.at(k);
            sim_.reply(req, MsgKind::update_reply, wire::encode(msg));
        }
    }
    pending_.clear();
    own_received_.clear();
    to_reply_.clear();
}

// ---------------------------------------------------------------------------
// Reconnection and departure

void Agent::on_reconnect(int r, int missed_rounds, bool with_memory) {
    if (!init_done_ || aborted_ || missed_rounds <= 0) return;
    round_ = r;
    if (!with_memory) {
        const FlatWeights w0 = init_weights(cfg_.model);
        const auto parts = slice(w0, cfg_.K);
        for (int k : held_) global_sub_[k] = parts[static_cast<std::size_t>(k - 1)].values;
        epsilon_.clear();
        cache_.clear();
    }
    // Refresh every partition: co-held replicas are re-adopted from a
    // co-holder, everything else lands in the cache.
    refreshing_ = true;
    fetching_.clear();
    outstanding_fetches_.clear();
    fetch_tried_.clear();
    for (int k = 1; k <= cfg_.K; ++k) {
        if (holds(k)) {
            if (table_.holders.at(k).size() > 1) start_fetch(k, true);
        } else {
            start_fetch(k, false);
        }
    }
}

registry::HandoffPlan Agent::terminate_now() {
    if (table_.held.size() <= 1) {
        // Last agent: persist the whole model and end.
        for (int k : held_) sim_.blob_put(wire::encode_values(global_sub_.at(k)));
        return registry::HandoffPlan{};
    }
    registry::HandoffPlan plan = registry::plan_leave(table_, id_);
    wire::TerminateMsg msg;
    msg.leaver = id_;
    for (const registry::Reassignment& r : plan.reassignments) {
        const std::string key = sim_.blob_put(wire::encode_values(global_sub_.at(r.partition_id)));
        msg.handoffs.push_back(
            {static_cast<uint32_t>(r.partition_id), r.to, key});
    }
    sim_.publish(id_, "membership", MsgKind::terminate, wire::encode(msg));
    return plan;
}

// ---------------------------------------------------------------------------
// Event handlers

void Agent::handle_message(const Envelope& env) {
    switch (env.kind) {
        case MsgKind::announce: {
            if (initiator_) return;
            const wire::Announce a = wire::decode_announce(env.payload);
            initiator_id_ = a.initiator;
            cfg_.model.layer_sizes = a.layer_sizes;
            cfg_.model.seed = a.model_seed;
            cfg_.K = static_cast<int>(a.partitions);
            cfg_.pi = static_cast<int>(a.pi);
            cfg_.rho = static_cast<int>(a.rho);
            cfg_.alpha = a.alpha;
            wire::JoinOffer offer{id_, cfg_.storage_offer};
            sim_.send(id_, initiator_id_, MsgKind::join_offer, wire::encode(offer));
            table_wait_timer_ = sim_.schedule_timer(id_, 2 * cfg_.init_timeout_us, kTableWait);
            return;
        }
        case MsgKind::join_offer: {
            if (initiator_ && !init_done_)
                offers_.push_back(wire::decode_join_offer(env.payload));
            return;
        }
        case MsgKind::table_bcast: {
            if (!init_done_) adopt_table(wire::decode_table_bcast(env.payload));
            return;
        }
        case MsgKind::replica_sync: {
            const wire::ReplicaSyncMsg msg = wire::decode_replica_sync(env.payload);
            const int k = static_cast<int>(msg.partition_id);
            if (!holds(k)) {
                stats(round_).sync_ignored += 1;  // log record
                return;
            }
            auto& bucket = pending_[k];
            for (const auto& [submitter, delta] : msg.contributions)
                bucket.emplace(submitter, delta);  // dedup by submitter id
            return;
        }
        case MsgKind::terminate: {
            const wire::TerminateMsg msg = wire::decode_terminate(env.payload);
            if (!table_.has_agent(msg.leaver)) return;
            const registry::HandoffPlan plan = registry::plan_leave(table_, msg.leaver);
            table_ = registry::apply_leave(table_, msg.leaver, plan);
            for (const auto& h : msg.handoffs) {
                if (h.to != id_) continue;
                const net::Bytes* blob = sim_.blob_get(h.blob_key);
                if (!blob) continue;
                std::vector<double> values = wire::decode_values(*blob);
                const int k = static_cast<int>(h.partition_id);
                auto it = global_sub_.find(k);
                if (it != global_sub_.end() && it->second.size() == values.size()) {
                    // Already had local values: merge by elementwise mean.
                    for (std::size_t i = 0; i < values.size(); ++i)
                        it->second[i] = 0.5 * (it->second[i] + values[i]);
                } else {
                    global_sub_[k] = std::move(values);
                }
                sim_.subscribe(id_, topic_name(k));
            }
            refresh_held_from_table();
            // Redeliver in-flight updates that were addressed to the leaver.
            std::vector<std::pair<uint64_t, PendingUpdate>> stale;
            for (const auto& [req, pu] : outstanding_updates_)
                if (pu.dst == msg.leaver && sim_.request_open(req)) stale.emplace_back(req, pu);
            for (auto& [req, pu] : stale) {
                outstanding_updates_.erase(req);
                if (holds(pu.k)) {
                    // The partition was handed to us; our delta becomes a
                    // self-contribution instead.
                    wire::UpdateMsg um = wire::decode_update(pu.payload);
                    if (!pending_[pu.k].count(id_)) pending_[pu.k].emplace(id_, um.delta);
                    if (!own_received_[pu.k].count(id_))
                        own_received_[pu.k].emplace(id_, std::move(um.delta));
                    continue;
                }
                const AgentId dst = pick_holder(pu.k, {});
                if (dst == 0) continue;
                const uint64_t fresh =
                    sim_.request(id_, dst, MsgKind::update, pu.payload, cfg_.round_timeout_us);
                outstanding_updates_[fresh] = PendingUpdate{pu.k, dst, pu.payload};
            }
            return;
        }
        default:
            return;
    }
}

void Agent::handle_request(const Envelope& env) {
    switch (env.kind) {
        case MsgKind::update: {
            wire::UpdateMsg msg = wire::decode_update(env.payload);
            const int k = static_cast<int>(msg.partition_id);
            if (!holds(k) || msg.delta.size() != global_sub_.at(k).size()) {
                stats(round_).updates_ignored += 1;
                return;  // no reply; the sender's timeout covers it
            }
            auto& bucket = pending_[k];
            if (!bucket.count(msg.sender)) bucket.emplace(msg.sender, msg.delta);
            auto& own = own_received_[k];
            if (!own.count(msg.sender)) own.emplace(msg.sender, std::move(msg.delta));
            to_reply_[k].push_back(env.request_id);
            return;
        }
        case MsgKind::fetch: {
            const wire::FetchMsg msg = wire::decode_fetch(env.payload);
            const int k = static_cast<int>(msg.partition_id);
            if (!holds(k)) return;  // stale table at the requester; let it retry
            wire::FetchReplyMsg reply;
            reply.responder = id_;
            reply.round = static_cast<uint32_t>(round_);
            reply.partition_id = msg.partition_id;
            reply.values = global_sub_.at(k);
            sim_.reply(env.request_id, MsgKind::fetch_reply, wire::encode(reply));
            return;
        }
        case MsgKind::table_request: {
            if (initiator_ && !table_payload_.empty())
                sim_.reply(env.request_id, MsgKind::table_bcast, table_payload_);
            return;
        }
        default:
            return;
    }
}

void Agent::handle_reply(uint64_t request_id, const Envelope* env, bool timed_out) {
    if (timed_out) {
        if (auto it = outstanding_fetches_.find(request_id); it != outstanding_fetches_.end()) {
            const PendingFetch pf = it->second;
            outstanding_fetches_.erase(it);
            start_fetch(pf.k, pf.refresh_held);  // try the next holder
            return;
        }
        // Update timeout: asynchrony tolerated, the cache keeps its value.
        outstanding_updates_.erase(request_id);
        return;
    }

    switch (env->kind) {
        case MsgKind::update_reply: {
            wire::ReplyMsg msg = wire::decode_reply(env->payload);
            const int k = static_cast<int>(msg.partition_id);
            stats(round_).reply_elements_received += msg.values.size();
            // Late replies still land in the cache and apply next round.
            cache_[k] = CacheEntry{std::move(msg.values), static_cast<int>(msg.round)};
            outstanding_updates_.erase(request_id);
            return;
        }
        case MsgKind::fetch_reply: {
            wire::FetchReplyMsg msg = wire::decode_fetch_reply(env->payload);
            const int k = static_cast<int>(msg.partition_id);
            auto it = outstanding_fetches_.find(request_id);
            const bool refresh_held = it != outstanding_fetches_.end() && it->second.refresh_held;
            if (it != outstanding_fetches_.end()) outstanding_fetches_.erase(it);
            if (refresh_held && holds(k)) {
                auto& w = global_sub_.at(k);
                if (msg.values.size() == w.size()) w = std::move(msg.values);
            } else {
                cache_[k] = CacheEntry{std::move(msg.values), static_cast<int>(msg.round)};
            }
            fetching_.erase(k);
            maybe_train();
            return;
        }
        case MsgKind::table_bcast: {
            if (!init_done_) adopt_table(wire::decode_table_bcast(env->payload));
            return;
        }
        default:
            return;
    }
}

void Agent::handle_timer(uint64_t tag) {
    switch (tag) {
        case kOfferDeadline:
            if (initiator_ && !init_done_) build_and_broadcast_table();
            return;
        case kTableWait: {
            if (init_done_ || aborted_) return;
            if (table_retries_ >= cfg_.table_retry_budget) {
                aborted_ = true;
                return;
            }
            table_retries_ += 1;
            sim_.request(id_, initiator_id_, MsgKind::table_request,
                         wire::encode(wire::TableRequest{id_}), cfg_.init_timeout_us);
            table_wait_timer_ = sim_.schedule_timer(id_, 2 * cfg_.init_timeout_us, kTableWait);
            return;
        }
        default:
            return;
    }
}

void Agent::set_global_subvector(int k, std::vector<double> values) {
    if (!holds(k)) throw std::invalid_argument("not a holder of this partition");
    global_sub_[k] = std::move(values);
}

void Agent::set_epsilon(int k, double eps) { epsilon_[k] = eps; }

FlatWeights Agent::current_view() const {
    std::vector<SubVector> parts;
    const auto bounds = partition_bounds(cfg_.model.param_count(), cfg_.K);
    for (int k = 1; k <= cfg_.K; ++k) {
        SubVector sv;
        sv.partition_id = k;
        sv.offset = bounds[static_cast<std::size_t>(k - 1)].first;
        if (auto it = global_sub_.find(k); it != global_sub_.end()) {
            sv.values = it->second;
        } else if (auto ct = cache_.find(k); ct != cache_.end()) {
            sv.values = ct->second.values;
        } else {
            throw std::runtime_error("partition unavailable");
        }
        parts.push_back(std::move(sv));
    }
    return assemble(parts, cfg_.model.param_count());
}

}  // namespace partfed
