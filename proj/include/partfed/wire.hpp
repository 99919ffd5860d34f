#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "partfed/model.hpp"
#include "partfed/netsim.hpp"

namespace partfed::wire {

using net::Bytes;
using net::MsgKind;

// Canonical binary layout for every message: one kind byte, big-endian
// integers (u32/u64), doubles as big-endian IEEE-754 bit patterns. Byte
// accounting in tests relies on these layouts staying exact.

struct Announce {
    uint32_t initiator = 0;
    std::vector<int> layer_sizes;
    uint8_t loss_kind = 0;       // 0 = softmax cross-entropy
    uint8_t optimizer_tag = 0;   // 0 = SGD
    uint64_t model_seed = 0;
    uint32_t partitions = 0;     // K
    uint32_t pi = 0;
    uint32_t rho = 0;
    double alpha = 0.0;
};

struct JoinOffer {
    uint32_t agent = 0;
    uint64_t storage_bytes = 0;
};

struct TableBroadcast {
    uint32_t initiator = 0;
    std::string table_text;
    std::vector<uint32_t> trainer_only;  // responders that hold nothing
};

struct TableRequest {
    uint32_t agent = 0;
};

// delta = w_received - w_locally_trained for one partition.
struct UpdateMsg {
    uint32_t sender = 0;
    uint32_t round = 0;
    uint32_t partition_id = 0;
    std::vector<double> delta;
};

struct ReplyMsg {
    uint32_t responder = 0;
    uint32_t round = 0;
    uint32_t partition_id = 0;
    std::vector<double> values;
};

struct FetchMsg {
    uint32_t requester = 0;
    uint32_t round = 0;
    uint32_t partition_id = 0;
};

struct FetchReplyMsg {
    uint32_t responder = 0;
    uint32_t round = 0;
    uint32_t partition_id = 0;
    std::vector<double> values;
};

struct ReplicaSyncMsg {
    uint32_t origin = 0;
    uint32_t round = 0;
    uint32_t partition_id = 0;
    // (submitter, delta), submitter ids unique and ascending.
    std::vector<std::pair<uint32_t, std::vector<double>>> contributions;
};

struct TerminateMsg {
    uint32_t leaver = 0;
    struct Handoff {
        uint32_t partition_id = 0;
        uint32_t to = 0;
        std::string blob_key;
    };
    std::vector<Handoff> handoffs;  // solely-held partitions only
};

Bytes encode(const Announce&);
Bytes encode(const JoinOffer&);
Bytes encode(const TableBroadcast&);
Bytes encode(const TableRequest&);
Bytes encode(const UpdateMsg&);
Bytes encode(const ReplyMsg&);
Bytes encode(const FetchMsg&);
Bytes encode(const FetchReplyMsg&);
Bytes encode(const ReplicaSyncMsg&);
Bytes encode(const TerminateMsg&);

Announce decode_announce(const Bytes&);
JoinOffer decode_join_offer(const Bytes&);
TableBroadcast decode_table_bcast(const Bytes&);
TableRequest decode_table_request(const Bytes&);
UpdateMsg decode_update(const Bytes&);
ReplyMsg decode_reply(const Bytes&);
FetchMsg decode_fetch(const Bytes&);
FetchReplyMsg decode_fetch_reply(const Bytes&);
ReplicaSyncMsg decode_replica_sync(const Bytes&);
TerminateMsg decode_terminate(const Bytes&);

// Plain vector<double> blob payload for the object store.
Bytes encode_values(const std::vector<double>& values);
std::vector<double> decode_values(const Bytes&);

}  // namespace partfed::wire
