#include "partfed/wire.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace partfed::wire {

namespace {

void put_u8(Bytes& out, uint8_t v) { out.push_back(v); }

void put_u32(Bytes& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void put_u64(Bytes& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v >> 32));
    put_u32(out, static_cast<uint32_t>(v));
}

void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

void put_vec(Bytes& out, const std::vector<double>& v) {
    put_u32(out, static_cast<uint32_t>(v.size()));
    for (double x : v) put_f64(out, x);
}

void put_str(Bytes& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

struct Reader {
    const Bytes& data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) throw std::invalid_argument("malformed message");
    }
    uint8_t u8() {
        need(1);
        return data[pos++];
    }
    uint32_t u32() {
        need(4);
        uint32_t v = (static_cast<uint32_t>(data[pos]) << 24) |
                     (static_cast<uint32_t>(data[pos + 1]) << 16) |
                     (static_cast<uint32_t>(data[pos + 2]) << 8) |
                     static_cast<uint32_t>(data[pos + 3]);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        const uint64_t hi = u32();
        return (hi << 32) | u32();
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::vector<double> vec() {
        const uint32_t n = u32();
        need(static_cast<std::size_t>(n) * 8);
        std::vector<double> v(n);
        for (uint32_t i = 0; i < n; ++i) v[i] = f64();
        return v;
    }
    std::string str() {
        const uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data.data() + pos), n);
        pos += n;
        return s;
    }
};

Reader expect(const Bytes& data, MsgKind kind) {
    Reader r{data};
    if (r.u8() != static_cast<uint8_t>(kind)) throw std::invalid_argument("wrong message kind");
    return r;
}

}  // namespace

Bytes encode(const Announce& m) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(MsgKind::announce));
    put_u32(out, m.initiator);
    put_u32(out, static_cast<uint32_t>(m.layer_sizes.size()));
    for (int s : m.layer_sizes) put_u32(out, static_cast<uint32_t>(s));
    put_u8(out, m.loss_kind);
    put_u8(out, m.optimizer_tag);
    put_u64(out, m.model_seed);
    put_u32(out, m.partitions);
    put_u32(out, m.pi);
    put_u32(out, m.rho);
    put_f64(out, m.alpha);
    return out;
}

Announce decode_announce(const Bytes& data) {
    Reader r = expect(data, MsgKind::announce);
    Announce m;
    m.initiator = r.u32();
    const uint32_t n = r.u32();
    m.layer_sizes.resize(n);
    for (uint32_t i = 0; i < n; ++i) m.layer_sizes[i] = static_cast<int>(r.u32());
    m.loss_kind = r.u8();
    m.optimizer_tag = r.u8();
    m.model_seed = r.u64();
    m.partitions = r.u32();
    m.pi = r.u32();
    m.rho = r.u32();
    m.alpha = r.f64();
    return m;
}

Bytes encode(const JoinOffer& m) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(MsgKind::join_offer));
    put_u32(out, m.agent);
    put_u64(out, m.storage_bytes);
    return out;
}

JoinOffer decode_join_offer(const Bytes& data) {
    Reader r = expect(data, MsgKind::join_offer);
    JoinOffer m;
    m.agent = r.u32();
    m.storage_bytes = r.u64();
    return m;
}

Bytes encode(const TableBroadcast& m) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(MsgKind::table_bcast));
    put_u32(out, m.initiator);
    put_str(out, m.table_text);
    put_u32(out, static_cast<uint32_t>(m.trainer_only.size()));
    for (uint32_t a : m.trainer_only) put_u32(out, a);
    return out;
}

TableBroadcast decode_table_bcast(const Bytes& data) {
    Reader r = expect(data, MsgKind::table_bcast);
    TableBroadcast m;
    m.initiator = r.u32();
    m.table_text = r.str();
    const uint32_t n = r.u32();
    m.trainer_only.resize(n);
    for (uint32_t i = 0; i < n; ++i) m.trainer_only[i] = r.u32();
    return m;
}

Bytes encode(const TableRequest& m) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(MsgKind::table_request));
    put_u32(out, m.agent);
    return out;
}

TableRequest decode_table_request(const Bytes& data) {
    Reader r = expect(data, MsgKind::table_request);
    return TableRequest{r.u32()};
}

Bytes encode(const UpdateMsg& m) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(MsgKind::update));
    put_u32(out, m.sender);
    put_u32(out, m.round);
    put_u32(out, m.partition_id);
    put_vec(out, m.delta);
    return out;
}

UpdateMsg decode_update(const Bytes& data) {
    Reader r = expect(data, MsgKind::update);
    UpdateMsg m;
    m.sender = r.u32();
    m.round = r.u32();
    m.partition_id = r.u32();
    m.delta = r.vec();
    return m;
}

Bytes encode(const ReplyMsg& m) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(MsgKind::update_reply));
    put_u32(out, m.responder);
    put_u32(out, m.round);
    put_u32(out, m.partition_id);
    put_vec(out, m.values);
    return out;
}

ReplyMsg decode_reply(const Bytes& data) {
    Reader r = expect(data, MsgKind::update_reply);
    ReplyMsg m;
    m.responder = r.u32();
    m.round = r.u32();
    m.partition_id = r.u32();
    m.values = r.vec();
    return m;
}

Bytes encode(const FetchMsg& m) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(MsgKind::fetch));
    put_u32(out, m.requester);
    put_u32(out, m.round);
    put_u32(out, m.partition_id);
    return out;
}

FetchMsg decode_fetch(const Bytes& data) {
    Reader r = expect(data, MsgKind::fetch);
    FetchMsg m;
    m.requester = r.u32();
    m.round = r.u32();
    m.partition_id = r.u32();
    return m;
}

Bytes encode(const FetchReplyMsg& m) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(MsgKind::fetch_reply));
    put_u32(out, m.responder);
    put_u32(out, m.round);
    put_u32(out, m.partition_id);
    put_vec(out, m.values);
    return out;
}

FetchReplyMsg decode_fetch_reply(const Bytes& data) {
    Reader r = expect(data, MsgKind::fetch_reply);
    FetchReplyMsg m;
    m.responder = r.u32();
    m.round = r.u32();
    m.partition_id = r.u32();
    m.values = r.vec();
    return m;
}

Bytes encode(const ReplicaSyncMsg& m) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(MsgKind::replica_sync));
    put_u32(out, m.origin);
    put_u32(out, m.round);
    put_u32(out, m.partition_id);
    put_u32(out, static_cast<uint32_t>(m.contributions.size()));
    for (const auto& [submitter, delta] : m.contributions) {
        put_u32(out, submitter);
        put_vec(out, delta);
    }
    return out;
}

ReplicaSyncMsg decode_replica_sync(const Bytes& data) {
    Reader r = expect(data, MsgKind::replica_sync);
    ReplicaSyncMsg m;
    m.origin = r.u32();
    m.round = r.u32();
    m.partition_id = r.u32();
    const uint32_t n = r.u32();
    m.contributions.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        const uint32_t submitter = r.u32();
        m.contributions.emplace_back(submitter, r.vec());
    }
    return m;
}

Bytes encode(const TerminateMsg& m) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(MsgKind::terminate));
    put_u32(out, m.leaver);
    put_u32(out, static_cast<uint32_t>(m.handoffs.size()));
    for (const auto& h : m.handoffs) {
        put_u32(out, h.partition_id);
        put_u32(out, h.to);
        put_str(out, h.blob_key);
    }
    return out;
}

TerminateMsg decode_terminate(const Bytes& data) {
    Reader r = expect(data, MsgKind::terminate);
    TerminateMsg m;
    m.leaver = r.u32();
    const uint32_t n = r.u32();
    m.handoffs.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        m.handoffs[i].partition_id = r.u32();
        m.handoffs[i].to = r.u32();
        m.handoffs[i].blob_key = r.str();
    }
    return m;
}

Bytes encode_values(const std::vector<double>& values) {
    Bytes out;
    put_vec(out, values);
    return out;
}

std::vector<double> decode_values(const Bytes& data) {
    Reader r{data};
    return r.vec();
}

}  // namespace partfed::wire
