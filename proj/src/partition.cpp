#include "partfed/partition.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace partfed::registry {

namespace {

void insert_sorted(std::vector<AgentId>& v, AgentId a) {
    v.insert(std::lower_bound(v.begin(), v.end(), a), a);
}

void insert_sorted(std::vector<int>& v, int k) {
    v.insert(std::lower_bound(v.begin(), v.end(), k), k);
}

template <typename T>
void erase_value(std::vector<T>& v, T x) {
    auto it = std::find(v.begin(), v.end(), x);
    if (it != v.end()) v.erase(it);
}

}  // namespace

int PartitionTable::replication(int k) const {
    auto it = holders.find(k);
    return it == holders.end() ? 0 : static_cast<int>(it->second.size());
}

void PartitionTable::check_invariants() const {
    if (K < 1 || pi < 1 || pi > K || rho < 1) throw std::logic_error("bad table parameters");
    for (int k = 1; k <= K; ++k) {
        const int r = replication(k);
        if (r < 1 || r > rho) throw std::logic_error("replication out of [1, rho]");
    }
    // The unique bootstrap state (one agent holding everything) is exempt
    // from the per-agent minimum.
    const bool is_bootstrap =
        held.size() == 1 && static_cast<int>(held.begin()->second.size()) == K;
    for (const auto& [a, ks] : held) {
        if (ks.empty()) throw std::logic_error("agent with empty holding recorded");
        if (!is_bootstrap && static_cast<int>(ks.size()) < pi)
            throw std::logic_error("agent below pi");
        for (int k : ks) {
            const auto it = holders.find(k);
            if (it == holders.end() ||
                !std::binary_search(it->second.begin(), it->second.end(), a))
                throw std::logic_error("held/holders out of sync");
        }
    }
    for (const auto& [k, as] : holders)
        for (AgentId a : as) {
            const auto it = held.find(a);
            if (it == held.end() || !std::binary_search(it->second.begin(), it->second.end(), k))
                throw std::logic_error("holders/held out of sync");
        }
}

std::string PartitionTable::to_text() const {
    std::ostringstream out;
    out << "K=" << K << " pi=" << pi << " rho=" << rho << "\n";
    for (const auto& [k, as] : holders) {
        out << k << ":";
        for (std::size_t i = 0; i < as.size(); ++i) out << (i ? "," : "") << as[i];
        out << "\n";
    }
    return out.str();
}

PartitionTable PartitionTable::from_text(const std::string& text) {
    PartitionTable t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty table text");
    if (std::sscanf(line.c_str(), "K=%d pi=%d rho=%d", &t.K, &t.pi, &t.rho) != 3)
        throw std::invalid_argument("bad table header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t colon = line.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("bad table row");
        const int k = std::stoi(line.substr(0, colon));
        std::string rest = line.substr(colon + 1);
        std::vector<AgentId> agents;
        std::size_t pos = 0;
        while (pos < rest.size()) {
            std::size_t comma = rest.find(',', pos);
            if (comma == std::string::npos) comma = rest.size();
            agents.push_back(static_cast<AgentId>(std::stoul(rest.substr(pos, comma - pos))));
            pos = comma + 1;
        }
        t.holders[k] = agents;
        for (AgentId a : agents) insert_sorted(t.held[a], k);
    }
    return t;
}

PartitionTable bootstrap(int K, int pi, int rho, AgentId initiator) {
    if (K < 1 || pi < 1 || pi > K || rho < 1)
        throw std::invalid_argument("invalid partition parameters");
    PartitionTable t;
    t.K = K;
    t.pi = pi;
    t.rho = rho;
    for (int k = 1; k <= K; ++k) {
        t.holders[k] = {initiator};
        t.held[initiator].push_back(k);
    }
    return t;
}

JoinOutcome join(const PartitionTable& table, AgentId newcomer) {
    if (table.has_agent(newcomer)) throw std::invalid_argument("duplicate join");
    PartitionTable scratch = table;
    JoinResult result;

    const auto load = [&](AgentId a) {
        auto it = scratch.held.find(a);
        return it == scratch.held.end() ? 0 : static_cast<int>(it->second.size());
    };

    while (static_cast<int>(result.assigned.size()) < table.pi) {
        // Candidate = not yet chosen, and either under-replicated or served
        // by a donor that can drop below its current holding without going
        // under pi. The donor for a partition is its most-loaded holder
        // (ties to the lowest agent id).
        int best_k = 0;
        AgentId best_donor = 0;
        int best_rep = 0;
        int best_donor_load = 0;
        for (int k = 1; k <= table.K; ++k) {
            if (std::binary_search(result.assigned.begin(), result.assigned.end(), k)) continue;
            const auto& hs = scratch.holders.at(k);
            const int rep = static_cast<int>(hs.size());
            AgentId donor = hs.front();
            for (AgentId a : hs)
                if (load(a) > load(donor)) donor = a;
            const int donor_load = load(donor);
            const bool can_replicate = rep < table.rho;
            const bool can_relinquish = donor_load > table.pi;
            if (!can_replicate && !can_relinquish) continue;
            const bool better =
                best_k == 0 || rep < best_rep ||
                (rep == best_rep &&
                 (donor_load > best_donor_load || (donor_load == best_donor_load && k > best_k)));
            if (better) {
                best_k = k;
                best_donor = donor;
                best_rep = rep;
                best_donor_load = donor_load;
            }
        }
        if (best_k == 0) break;  // no candidate remains

        const bool relinquish = load(best_donor) - 1 >= table.pi;
        if (relinquish) {
            erase_value(scratch.holders.at(best_k), best_donor);
            erase_value(scratch.held.at(best_donor), best_k);
            if (scratch.held.at(best_donor).empty()) scratch.held.erase(best_donor);
        }
        // Otherwise both hold it; eligibility already guaranteed rep < rho.
        insert_sorted(scratch.holders.at(best_k), newcomer);
        insert_sorted(scratch.held[newcomer], best_k);
        insert_sorted(result.assigned, best_k);
        result.transfers.push_back(Transfer{best_k, best_donor, relinquish});
    }

    if (static_cast<int>(result.assigned.size()) < table.pi)
        return JoinOutcome{table, JoinResult{}};  // trainer-only, table unchanged
    return JoinOutcome{std::move(scratch), std::move(result)};
}

std::vector<AgentId> lookup(const PartitionTable& table, int partition_id) {
    if (partition_id < 1 || partition_id > table.K)
        throw std::out_of_range("unknown partition");
    return table.holders.at(partition_id);
}

HandoffPlan plan_leave(const PartitionTable& table, AgentId leaver) {
    const auto it = table.held.find(leaver);
    if (it == table.held.end()) throw std::invalid_argument("unknown agent");
    HandoffPlan plan;
    std::map<AgentId, int> loads;
    for (const auto& [a, ks] : table.held)
        if (a != leaver) loads[a] = static_cast<int>(ks.size());
    for (int k : it->second) {
        if (table.holders.at(k).size() > 1) continue;  // co-holders keep it
        if (loads.empty()) throw std::invalid_argument("no successor");
        AgentId best = loads.begin()->first;
        for (const auto& [a, l] : loads)
            if (l < loads[best]) best = a;
        plan.reassignments.push_back(Reassignment{k, leaver, best});
        loads[best] += 1;
    }
    return plan;
}

PartitionTable apply_leave(const PartitionTable& table, AgentId leaver, const HandoffPlan& plan) {
    PartitionTable t = table;
    const auto it = t.held.find(leaver);
    if (it == t.held.end()) throw std::invalid_argument("unknown agent");
    for (int k : it->second) erase_value(t.holders.at(k), leaver);
    t.held.erase(leaver);
    for (const Reassignment& r : plan.reassignments) {
        insert_sorted(t.holders.at(r.partition_id), r.to);
        insert_sorted(t.held[r.to], r.partition_id);
    }
    return t;
}

}  // namespace partfed::registry
