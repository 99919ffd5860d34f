#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace partfed::registry {

using AgentId = uint32_t;

// Global partition-to-agents assignment under the pi/rho constraints.
// Pure value type: operations below return fresh tables/plans, callers
// apply them. Every agent derives the identical table from the same call
// sequence, which is what lets the table be replicated by broadcast.
struct PartitionTable {
    int K = 0;
    int pi = 0;   // minimum partitions per storing agent
    int rho = 0;  // maximum replicas per partition
    std::map<int, std::vector<AgentId>> holders;  // partition -> ascending agent ids
    std::map<AgentId, std::vector<int>> held;     // agent -> ascending partition ids

    bool has_agent(AgentId a) const { return held.count(a) != 0; }
    int replication(int k) const;

    // Throws std::logic_error when a structural invariant is broken.
    void check_invariants() const;

    // Canonical text form (sorted keys) used for logging and the table
    // broadcast payload.
    std::string to_text() const;
    static PartitionTable from_text(const std::string& text);

    bool operator==(const PartitionTable&) const = default;
};

struct Transfer {
    int partition_id = 0;
    AgentId donor = 0;
    bool relinquished = false;  // false: donor keeps a replica
};

struct JoinResult {
    std::vector<int> assigned;  // ascending; empty => trainer-only
    std::vector<Transfer> transfers;
};

struct JoinOutcome {
    PartitionTable table;
    JoinResult result;
};

struct Reassignment {
    int partition_id = 0;
    AgentId from = 0;
    AgentId to = 0;
};

struct HandoffPlan {
    std::vector<Reassignment> reassignments;
};

// Initial state: the initiator holds every partition.
PartitionTable bootstrap(int K, int pi, int rho, AgentId initiator);

// Selection loop for a newcomer: repeatedly pick, among partitions it does
// not yet have that are either under-replicated or relinquishable, the one
// with (lowest replication, most-loaded donor, highest id). The donor gives
// the partition up whenever that leaves it at >= pi, otherwise both hold it.
// If fewer than pi partitions are obtainable the table is unchanged and the
// newcomer joins as trainer-only.
JoinOutcome join(const PartitionTable& table, AgentId newcomer);

// holders[k], ascending. Throws on a partition id outside [1, K].
std::vector<AgentId> lookup(const PartitionTable& table, int partition_id);

// Reassigns every partition held solely by the leaver to the least-loaded
// remaining agent (ties to the lowest id, loads updated as the plan grows).
// Co-held partitions are simply dropped.
HandoffPlan plan_leave(const PartitionTable& table, AgentId leaver);

// Removes the leaver and applies the plan.
PartitionTable apply_leave(const PartitionTable& table, AgentId leaver, const HandoffPlan& plan);

}  // namespace partfed::registry
