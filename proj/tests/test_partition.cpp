#include <doctest.h>

#include <algorithm>
#include <set>

#include "partfed/partition.hpp"
#include "partfed/rng.hpp"

using namespace partfed;
using namespace partfed::registry;

namespace {

std::vector<int> ids(int from, int to) {
    std::vector<int> v;
    for (int k = from; k <= to; ++k) v.push_back(k);
    return v;
}

}  // namespace

TEST_CASE("bootstrap gives the initiator everything") {
    const PartitionTable t = bootstrap(6, 4, 2, 1);
    CHECK(t.held.at(1) == ids(1, 6));
    CHECK(t.holders.size() == 6);
    t.check_invariants();

    const PartitionTable tiny = bootstrap(1, 1, 1, 9);
    CHECK(tiny.held.at(9) == ids(1, 1));

    CHECK_THROWS(bootstrap(4, 5, 1, 1));  // pi > K
    CHECK_THROWS(bootstrap(0, 1, 1, 1));
    CHECK_THROWS(bootstrap(4, 1, 0, 1));
}

TEST_CASE("the six-partition walkthrough assigns exactly as documented") {
    PartitionTable t = bootstrap(6, 4, 2, 1);

    JoinOutcome j2 = join(t, 2);
    CHECK(j2.result.assigned == std::vector<int>{3, 4, 5, 6});
    t = j2.table;
    CHECK(t.held.at(1) == std::vector<int>{1, 2, 3, 4});
    // 6 and 5 were relinquished, 4 and 3 are co-held.
    REQUIRE(j2.result.transfers.size() == 4);
    CHECK(j2.result.transfers[0].partition_id == 6);
    CHECK(j2.result.transfers[0].relinquished);
    CHECK(j2.result.transfers[1].partition_id == 5);
    CHECK(j2.result.transfers[1].relinquished);
    CHECK(j2.result.transfers[2].partition_id == 4);
    CHECK_FALSE(j2.result.transfers[2].relinquished);
    CHECK(j2.result.transfers[3].partition_id == 3);
    CHECK_FALSE(j2.result.transfers[3].relinquished);

    JoinOutcome j3 = join(t, 3);
    CHECK(j3.result.assigned == std::vector<int>{1, 2, 5, 6});
    t = j3.table;
    for (int k = 1; k <= 6; ++k) CHECK(t.holders.at(k).size() == 2);
    t.check_invariants();

    // A fourth joiner cannot replicate anything: empty assignment, table
    // untouched.
    JoinOutcome j4 = join(t, 4);
    CHECK(j4.result.assigned.empty());
    CHECK(j4.table == t);

    CHECK_THROWS_WITH(join(t, 2), "duplicate join");
}

TEST_CASE("with rho=1 every transfer is a relinquishment") {
    PartitionTable t = bootstrap(4, 2, 1, 1);
    const JoinOutcome j = join(t, 2);
    CHECK(j.result.assigned == std::vector<int>{3, 4});
    CHECK(j.table.held.at(1) == std::vector<int>{1, 2});
    for (const Transfer& tr : j.result.transfers) CHECK(tr.relinquished);
}

TEST_CASE("lookup returns ascending holders and range-checks") {
    PartitionTable t = bootstrap(6, 4, 2, 1);
    t = join(t, 2).table;
    t = join(t, 3).table;
    CHECK(lookup(t, 3) == std::vector<AgentId>{1, 2});
    CHECK_THROWS(lookup(t, 7));
    CHECK_THROWS(lookup(t, 0));

    const PartitionTable boot = bootstrap(3, 1, 1, 4);
    for (int k = 1; k <= 3; ++k) CHECK(lookup(boot, k) == std::vector<AgentId>{4});
}

TEST_CASE("plan_leave drops co-held partitions and reassigns sole ones") {
    PartitionTable t = bootstrap(6, 4, 2, 1);
    t = join(t, 2).table;
    t = join(t, 3).table;

    // Every partition is co-held, so a departure needs no reassignments.
    const HandoffPlan plan = plan_leave(t, 2);
    CHECK(plan.reassignments.empty());
    const PartitionTable after = apply_leave(t, 2, plan);
    for (int k = 3; k <= 6; ++k) CHECK(after.holders.at(k).size() == 1);
    after.check_invariants();

    // Sole holder of everything with nobody left.
    const PartitionTable boot = bootstrap(4, 2, 1, 1);
    CHECK_THROWS_WITH(plan_leave(boot, 1), "no successor");
    CHECK_THROWS_WITH(plan_leave(boot, 9), "unknown agent");

    // Least-loaded successor rule.
    PartitionTable two = bootstrap(4, 2, 1, 1);
    two = join(two, 2).table;  // a1 {1,2}, a2 {3,4}
    const HandoffPlan p2 = plan_leave(two, 2);
    REQUIRE(p2.reassignments.size() == 2);
    CHECK(p2.reassignments[0].partition_id == 3);
    CHECK(p2.reassignments[0].to == 1);
    CHECK(p2.reassignments[1].partition_id == 4);
    CHECK(p2.reassignments[1].to == 1);
    apply_leave(two, 2, p2).check_invariants();
}

TEST_CASE("plan_leave balances across remaining agents as it assigns") {
    // a1 {1,2}, a2 {3,4}, a3 {5,6}; then a3 gains nothing... build a lopsided
    // table by joining under rho=1 so departures have single-holder
    // partitions.
    PartitionTable t = bootstrap(6, 2, 1, 1);
    t = join(t, 2).table;  // a2 {5,6}
    t = join(t, 3).table;  // a3 {3,4}
    CHECK(t.held.at(1) == std::vector<int>{1, 2});
    const HandoffPlan plan = plan_leave(t, 1);
    REQUIRE(plan.reassignments.size() == 2);
    // Loads tie at 2, so the lowest id gets the first partition, then the
    // other agent gets the next.
    CHECK(plan.reassignments[0].partition_id == 1);
    CHECK(plan.reassignments[0].to == 2);
    CHECK(plan.reassignments[1].partition_id == 2);
    CHECK(plan.reassignments[1].to == 3);
    apply_leave(t, 1, plan).check_invariants();
}

TEST_CASE("random join/leave sequences preserve every invariant") {
    Rng rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        const int K = 1 + static_cast<int>(rng.below(64));
        const int pi = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(K)));
        const int rho = 1 + static_cast<int>(rng.below(4));
        PartitionTable t = bootstrap(K, pi, rho, 1);
        t.check_invariants();
        AgentId next = 2;
        std::vector<AgentId> members{1};
        for (int step = 0; step < 40; ++step) {
            const bool leave = !members.empty() && members.size() > 1 && rng.below(4) == 0;
            if (leave) {
                const AgentId who = members[rng.below(members.size())];
                // Keep at least one holder per partition.
                bool sole_and_last = false;
                try {
                    const HandoffPlan plan = plan_leave(t, who);
                    t = apply_leave(t, who, plan);
                } catch (const std::exception&) {
                    sole_and_last = true;
                }
                if (!sole_and_last)
                    members.erase(std::find(members.begin(), members.end(), who));
            } else {
                if (next > 100) break;
                const JoinOutcome out = join(t, next);
                const bool empty = out.result.assigned.empty();
                if (!empty) {
                    // join never hands out fewer than pi.
                    CHECK(static_cast<int>(out.result.assigned.size()) >= pi);
                    members.push_back(next);
                } else {
                    CHECK(out.table == t);
                }
                t = out.table;
                ++next;
            }
            t.check_invariants();
            // No existing holder ever drops below pi (bootstrap aside).
            const bool is_bootstrap = t.held.size() == 1 &&
                                      static_cast<int>(t.held.begin()->second.size()) == t.K;
            if (!is_bootstrap)
                for (const auto& [a, ks] : t.held)
                    CHECK(static_cast<int>(ks.size()) >= pi);
        }
    }
}

TEST_CASE("joins drive replication toward rho until capacity runs out") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const int K = 2 + static_cast<int>(rng.below(16));
        const int pi = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(std::min(K, 4))));
        const int rho = 1 + static_cast<int>(rng.below(4));
        PartitionTable t = bootstrap(K, pi, rho, 1);
        AgentId next = 2;
        while (next < 200) {
            const JoinOutcome out = join(t, next);
            if (out.result.assigned.empty()) break;
            t = out.table;
            ++next;
        }
        // Once no join can add a member, either every partition is fully
        // replicated or fewer than pi partitions still have headroom.
        int min_rep = t.rho;
        int with_headroom = 0;
        for (int k = 1; k <= t.K; ++k) {
            min_rep = std::min(min_rep, t.replication(k));
            if (t.replication(k) < t.rho) ++with_headroom;
        }
        const bool fully_replicated = min_rep == t.rho;
        CHECK((fully_replicated || with_headroom < t.pi));
    }
}

TEST_CASE("identical call sequences produce identical tables and text") {
    auto build = [] {
        PartitionTable t = bootstrap(8, 2, 2, 1);
        for (AgentId a = 2; a <= 6; ++a) t = join(t, a).table;
        const HandoffPlan plan = plan_leave(t, 3);
        return apply_leave(t, 3, plan);
    };
    const PartitionTable a = build();
    const PartitionTable b = build();
    CHECK(a == b);
    CHECK(a.to_text() == b.to_text());
    CHECK(PartitionTable::from_text(a.to_text()) == a);
}
