#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "partfed/agent.hpp"
#include "partfed/central.hpp"
#include "partfed/netsim.hpp"
#include "partfed/scenario.hpp"

namespace partfed {

struct MetricRow {
    int round = 0;
    std::string agent_id;  // "global" or the agent id
    double accuracy = 0.0;
    double loss = 0.0;
    uint64_t bytes_sent = 0;
    uint64_t bytes_received = 0;
    double epsilon_mean = 0.0;
    std::string event;
};

inline constexpr const char* kCsvHeader =
    "round,agent_id,accuracy,loss,bytes_sent,bytes_received,epsilon_mean,event";

std::string rows_to_csv(const std::vector<MetricRow>& rows);

struct RunResult {
    std::string name;
    std::vector<MetricRow> rows;  // includes per-agent rows when enabled
    std::string csv;
    double final_accuracy = 0.0;
};

// One decentralized experiment: wires the agents into the simulator, runs
// the membership handshake and then the configured rounds in synchronous
// (barrier) or asynchronous (round-timeout) mode.
class Simulation {
public:
    explicit Simulation(ScenarioConfig cfg);

    void run_init();
    void run_round();
    RunResult run_all();
    bool threshold_reached() const;

    Agent& agent(net::AgentId id);
    const std::vector<std::unique_ptr<Agent>>& agents() const { return agents_; }
    net::Simulator& net() { return sim_; }
    const ScenarioConfig& config() const { return cfg_; }
    const DatasetShard& eval_shard() const { return data_.eval; }
    int rounds_done() const { return rounds_done_; }

    // Initiator's assembled model; the initial weights before round 1.
    FlatWeights global_view() const;

    // Called after each round's metrics row is recorded.
    std::function<void(int round, Simulation&)> on_round_end;

private:
    void record_round_metrics(int r, const std::string& event);
    bool scheduled_disconnected(net::AgentId a, int round) const;

    ScenarioConfig cfg_;
    LoadedData data_;
    net::Simulator sim_;
    std::vector<std::unique_ptr<Agent>> agents_;
    int rounds_done_ = 0;
    int64_t round_base_ = 0;
    std::vector<MetricRow> rows_;
};

// Dispatches on cfg.engine (decentralized simulation or the centralized
// baseline); both emit the same CSV schema.
RunResult run_scenario(const ScenarioConfig& cfg);

struct GapPoint {
    int round = 0;
    double accuracy_a = 0.0;
    double accuracy_b = 0.0;
    double gap = 0.0;  // a - b
};

struct GapReport {
    std::vector<GapPoint> points;
    double max_abs_gap = 0.0;
    double final_gap = 0.0;
    std::string to_text() const;
};

// Per-round accuracy gaps between the "global" rows of two metric CSVs.
// Throws ConfigError on schema mismatch or differing round counts.
GapReport compare_metrics(const std::string& csv_a, const std::string& csv_b);

}  // namespace partfed
