#include <doctest.h>

#include "partfed/wire.hpp"

using namespace partfed;
using namespace partfed::wire;

TEST_CASE("update and reply messages survive the round trip exactly") {
    UpdateMsg u;
    u.sender = 7;
    u.round = 12;
    u.partition_id = 3;
    u.delta = {0.5, -1.25, 3.75e-300, 0.0};
    const Bytes bytes = encode(u);
    // kind + sender + round + partition + count + 4 doubles
    CHECK(bytes.size() == 1 + 4 + 4 + 4 + 4 + 4 * 8);
    const UpdateMsg back = decode_update(bytes);
    CHECK(back.sender == u.sender);
    CHECK(back.round == u.round);
    CHECK(back.partition_id == u.partition_id);
    CHECK(back.delta == u.delta);

    ReplyMsg r;
    r.responder = 9;
    r.round = 1;
    r.partition_id = 2;
    r.values = {1e-17, -0.0, 42.0};
    const ReplyMsg r2 = decode_reply(encode(r));
    CHECK(r2.values == r.values);
}

TEST_CASE("the announce carries the full model description") {
    Announce a;
    a.initiator = 1;
    a.layer_sizes = {785, 500, 100, 10};
    a.model_seed = 0xdeadbeefcafef00dULL;
    a.partitions = 10;
    a.pi = 2;
    a.rho = 2;
    a.alpha = 0.25;
    const Announce b = decode_announce(encode(a));
    CHECK(b.layer_sizes == a.layer_sizes);
    CHECK(b.model_seed == a.model_seed);
    CHECK(b.alpha == a.alpha);
    CHECK(b.pi == 2);
}

TEST_CASE("replica sync keeps submitter order and contents") {
    ReplicaSyncMsg m;
    m.origin = 4;
    m.round = 6;
    m.partition_id = 2;
    m.contributions = {{1, {0.1, 0.2}}, {3, {-0.5, 0.5}}, {9, {0.0, 1.0}}};
    const ReplicaSyncMsg back = decode_replica_sync(encode(m));
    REQUIRE(back.contributions.size() == 3);
    CHECK(back.contributions[1].first == 3);
    CHECK(back.contributions[1].second == std::vector<double>{-0.5, 0.5});
}

TEST_CASE("terminate handoffs round-trip with blob keys") {
    TerminateMsg t;
    t.leaver = 5;
    t.handoffs = {{2, 7, "00ff00ff00ff00ff"}, {4, 1, "abcdef0123456789"}};
    const TerminateMsg back = decode_terminate(encode(t));
    REQUIRE(back.handoffs.size() == 2);
    CHECK(back.handoffs[0].partition_id == 2);
    CHECK(back.handoffs[0].to == 7);
    CHECK(back.handoffs[0].blob_key == "00ff00ff00ff00ff");
}

TEST_CASE("join offers, table broadcasts and fetches round-trip") {
    const JoinOffer offer = decode_join_offer(encode(JoinOffer{3, 123456789ULL}));
    CHECK(offer.agent == 3);
    CHECK(offer.storage_bytes == 123456789ULL);

    TableBroadcast tb;
    tb.initiator = 1;
    tb.table_text = "K=2 pi=1 rho=1\n1:1\n2:2\n";
    tb.trainer_only = {4, 5};
    const TableBroadcast tb2 = decode_table_bcast(encode(tb));
    CHECK(tb2.table_text == tb.table_text);
    CHECK(tb2.trainer_only == tb.trainer_only);

    const FetchMsg f = decode_fetch(encode(FetchMsg{2, 9, 4}));
    CHECK(f.requester == 2);
    CHECK(f.round == 9);
    CHECK(f.partition_id == 4);

    FetchReplyMsg fr;
    fr.responder = 8;
    fr.round = 9;
    fr.partition_id = 4;
    fr.values = {3.14159};
    CHECK(decode_fetch_reply(encode(fr)).values == fr.values);
}

TEST_CASE("malformed and mis-typed payloads are rejected") {
    const Bytes update = encode(UpdateMsg{1, 2, 3, {1.0}});
    CHECK_THROWS(decode_reply(update));  // wrong kind byte
    Bytes truncated(update.begin(), update.begin() + 10);
    CHECK_THROWS(decode_update(truncated));
    CHECK_THROWS(decode_update(Bytes{}));

    // A length prefix pointing past the payload must not read out of range.
    Bytes lying = update;
    lying[13] = 0xff;  // corrupt the count field
    CHECK_THROWS(decode_update(lying));
}

TEST_CASE("value blobs round-trip") {
    const std::vector<double> values{1.0, -2.5, 1e300, 5e-324};
    CHECK(decode_values(encode_values(values)) == values);
}
