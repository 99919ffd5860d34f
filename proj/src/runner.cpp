#include "partfed/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "partfed/errors.hpp"
#include "partfed/rng.hpp"

namespace partfed {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

AgentConfig agent_config(const ScenarioConfig& cfg, net::AgentId id) {
    AgentConfig ac;
    ac.model = cfg.model;
    ac.train = cfg.train;
    ac.K = cfg.K;
    ac.pi = cfg.pi;
    ac.rho = cfg.rho;
    ac.alpha = cfg.alpha;
    ac.epsilon_mode = cfg.epsilon_mode;
    ac.init_timeout_us = cfg.init_timeout_us;
    // In synchronous mode the barrier settles every update request, so no
    // timeout is scheduled at all.
    ac.round_timeout_us = cfg.sync_mode == SyncMode::synchronous ? 0 : cfg.round_timeout_us;
    ac.fetch_timeout_us = std::max<int64_t>(1000, cfg.round_timeout_us / 5);
    auto it = cfg.storage_overrides.find(id);
    ac.storage_offer = it != cfg.storage_overrides.end() ? it->second : cfg.default_storage_offer;
    return ac;
}

}  // namespace

std::string rows_to_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream out;
    out << kCsvHeader << "\n";
    for (const MetricRow& r : rows) {
        out << r.round << ',' << r.agent_id << ',' << fmt_double(r.accuracy) << ','
            << fmt_double(r.loss) << ',' << r.bytes_sent << ',' << r.bytes_received << ','
            << fmt_double(r.epsilon_mean) << ',' << r.event << "\n";
    }
    return out.str();
}

Simulation::Simulation(ScenarioConfig cfg)
    : cfg_(std::move(cfg)), data_(load_dataset(cfg_)), sim_(cfg_.net) {
    agents_.reserve(static_cast<std::size_t>(cfg_.agents));
    for (int i = 0; i < cfg_.agents; ++i) {
        const net::AgentId id = static_cast<net::AgentId>(i + 1);
        agents_.push_back(std::make_unique<Agent>(id, agent_config(cfg_, id),
                                                  data_.shards[static_cast<std::size_t>(i)], sim_,
                                                  /*initiator=*/i == 0));
        sim_.add_agent(id, agents_.back()->hooks());
        sim_.subscribe(id, "membership");
    }
}

Agent& Simulation::agent(net::AgentId id) {
    for (auto& a : agents_)
        if (a->id() == id) return *a;
    throw std::out_of_range("no such agent");
}

void Simulation::run_init() {
    // The handshake itself is kept loss-free; loss and latency apply to the
    // training phase. The retry/abort path is exercised by tests through the
    // fault filter.
    const double drop = sim_.drop_prob();
    sim_.set_drop_prob(0.0);
    sim_.set_round(0);
    for (auto& a : agents_) a->start_init();
    sim_.run_until_idle();
    sim_.set_drop_prob(drop);
    for (auto& a : agents_)
        if (!a->init_done() && !a->aborted())
            throw std::runtime_error("agent did not finish the membership handshake");
    round_base_ = sim_.now();

    MetricRow row;
    row.round = 0;
    row.agent_id = "global";
    const EvalResult e = evaluate(cfg_.model, init_weights(cfg_.model), data_.eval);
    row.accuracy = e.accuracy;
    row.loss = e.loss;
    row.event = "init";
    rows_.push_back(std::move(row));
}

bool Simulation::scheduled_disconnected(net::AgentId a, int round) const {
    if (round < 1) return false;
    for (const auto& d : cfg_.net.disconnects)
        if (d.agent == a && round >= d.from_round && round <= d.to_round) return true;
    return false;
}

void Simulation::run_round() {
    const int r = rounds_done_ + 1;
    sim_.set_round(r);

    std::string event;
    std::string disconnected_now, reconnected_now;
    for (auto& a : agents_) {
        const net::AgentId id = a->id();
        if (scheduled_disconnected(id, r) && !scheduled_disconnected(id, r - 1))
            disconnected_now += (disconnected_now.empty() ? "" : " ") + std::to_string(id);
        if (!scheduled_disconnected(id, r) && scheduled_disconnected(id, r - 1))
            reconnected_now += (reconnected_now.empty() ? "" : " ") + std::to_string(id);
    }
    if (!disconnected_now.empty()) event += "disconnect:" + disconnected_now;
    if (!reconnected_now.empty())
        event += (event.empty() ? "" : ";") + ("reconnect:" + reconnected_now);

    // Reconnections first: the refresh fetches then overlap the round start.
    for (auto& a : agents_) {
        const net::AgentId id = a->id();
        if (scheduled_disconnected(id, r) || !scheduled_disconnected(id, r - 1)) continue;
        int missed = 0;
        bool with_memory = true;
        for (int back = r - 1; back >= 1 && scheduled_disconnected(id, back); --back) {
            ++missed;
            for (const auto& d : cfg_.net.disconnects)
                if (d.agent == id && back >= d.from_round && back <= d.to_round)
                    with_memory = d.with_memory;
        }
        a->on_reconnect(r, missed, with_memory);
    }

    if (cfg_.sync_mode == SyncMode::synchronous) {
        for (auto& a : agents_)
            if (sim_.connected(a->id())) a->begin_round(r);
        sim_.run_until_idle();
        for (auto& a : agents_)
            if (sim_.connected(a->id())) a->publish_replica_sync(r);
        sim_.run_until_idle();
        for (auto& a : agents_)
            if (sim_.connected(a->id())) a->close_round(r);
        sim_.run_until_idle();
    } else {
        const int64_t t0 = round_base_ + static_cast<int64_t>(r - 1) * cfg_.round_timeout_us;
        const int64_t sync_at = t0 + cfg_.round_timeout_us * 7 / 10;
        const int64_t close_at = t0 + cfg_.round_timeout_us * 98 / 100;
        sim_.run_until(t0);
        for (auto& a : agents_)
            if (sim_.connected(a->id())) a->begin_round(r);
        sim_.schedule_call(sync_at, [this, r] {
            for (auto& a : agents_)
                if (sim_.connected(a->id())) a->publish_replica_sync(r);
        });
        sim_.schedule_call(close_at, [this, r] {
            for (auto& a : agents_)
                if (sim_.connected(a->id())) a->close_round(r);
        });
        sim_.run_until(t0 + cfg_.round_timeout_us - 1);
    }

    rounds_done_ = r;
    sim_.set_round(r + 1);  // closes round r; late traffic books to r+1
    record_round_metrics(r, event);
    if (on_round_end) on_round_end(r, *this);
}

FlatWeights Simulation::global_view() const {
    if (rounds_done_ == 0) return init_weights(cfg_.model);
    return agents_.front()->current_view();
}

void Simulation::record_round_metrics(int r, const std::string& event) {
    MetricRow row;
    row.round = r;
    row.agent_id = "global";
    std::string round_event = event;
    try {
        const EvalResult e = evaluate(cfg_.model, global_view(), data_.eval);
        row.accuracy = e.accuracy;
        row.loss = e.loss;
    } catch (const std::exception&) {
        // A partition can be unreachable this round; the run carries on with
        // the last known metrics.
        for (auto it = rows_.rbegin(); it != rows_.rend(); ++it)
            if (it->agent_id == "global") {
                row.accuracy = it->accuracy;
                row.loss = it->loss;
                break;
            }
        round_event += round_event.empty() ? "view-incomplete" : ";view-incomplete";
    }
    const net::LedgerRow totals = sim_.ledger_snapshot(r);
    row.bytes_sent = totals.bytes_sent;
    row.bytes_received = totals.bytes_received;
    double eps_sum = 0.0;
    std::size_t eps_n = 0;
    for (const auto& a : agents_)
        for (const auto& [k, eps] : a->epsilon()) {
            eps_sum += eps;
            ++eps_n;
        }
    row.epsilon_mean = eps_n == 0 ? 0.0 : eps_sum / static_cast<double>(eps_n);
    row.event = round_event;
    rows_.push_back(row);

    if (cfg_.per_agent_rows) {
        for (const auto& a : agents_) {
            MetricRow ar;
            ar.round = r;
            ar.agent_id = std::to_string(a->id());
            try {
                const EvalResult ae = evaluate(cfg_.model, a->current_view(), data_.eval);
                ar.accuracy = ae.accuracy;
                ar.loss = ae.loss;
            } catch (const std::exception&) {
                ar.event = "view-incomplete";
            }
            const net::LedgerRow lr = sim_.ledger().row(r, a->id());
            ar.bytes_sent = lr.bytes_sent;
            ar.bytes_received = lr.bytes_received;
            double s = 0.0;
            for (const auto& [k, eps] : a->epsilon()) s += eps;
            ar.epsilon_mean = a->epsilon().empty()
                                  ? 0.0
                                  : s / static_cast<double>(a->epsilon().size());
            rows_.push_back(std::move(ar));
        }
    }
}

bool Simulation::threshold_reached() const {
    for (auto it = rows_.rbegin(); it != rows_.rend(); ++it)
        if (it->agent_id == "global") return it->accuracy >= cfg_.accuracy_threshold;
    return false;
}

RunResult Simulation::run_all() {
    run_init();
    for (int r = 0; r < cfg_.rounds && !threshold_reached(); ++r) run_round();
    RunResult result;
    result.name = cfg_.name;
    result.rows = rows_;
    result.csv = rows_to_csv(rows_);
    for (auto it = rows_.rbegin(); it != rows_.rend(); ++it)
        if (it->agent_id == "global") {
            result.final_accuracy = it->accuracy;
            break;
        }
    return result;
}

RunResult run_scenario(const ScenarioConfig& cfg) {
    if (cfg.engine == Engine::central) {
        LoadedData data = load_dataset(cfg);
        const auto records =
            central_train(cfg.model, data.shards, cfg.train, cfg.rounds, data.eval);
        RunResult result;
        result.name = cfg.name;
        for (const CentralRoundRecord& rec : records) {
            MetricRow row;
            row.round = rec.round;
            row.agent_id = "global";
            row.accuracy = rec.accuracy;
            row.loss = rec.loss;
            row.event = rec.round == 0 ? "init" : "";
            result.rows.push_back(std::move(row));
        }
        result.csv = rows_to_csv(result.rows);
        result.final_accuracy = result.rows.back().accuracy;
        return result;
    }
    Simulation sim(cfg);
    return sim.run_all();
}

namespace {

std::vector<std::pair<int, double>> global_accuracies(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty metrics file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ConfigError("schema mismatch");
    std::vector<std::pair<int, double>> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::getline(row, field, ',');
        const int round = std::stoi(field);
        std::getline(row, field, ',');
        if (field != "global") continue;
        std::getline(row, field, ',');
        out.emplace_back(round, std::stod(field));
    }
    return out;
}

}  // namespace

std::string GapReport::to_text() const {
    std::ostringstream out;
    out << "round,accuracy_a,accuracy_b,gap\n";
    for (const GapPoint& p : points)
        out << p.round << ',' << fmt_double(p.accuracy_a) << ',' << fmt_double(p.accuracy_b)
            << ',' << fmt_double(p.gap) << "\n";
    out << "max_abs_gap," << fmt_double(max_abs_gap) << "\n";
    out << "final_gap," << fmt_double(final_gap) << "\n";
    return out.str();
}

GapReport compare_metrics(const std::string& csv_a, const std::string& csv_b) {
    const auto a = global_accuracies(csv_a);
    const auto b = global_accuracies(csv_b);
    if (a.size() != b.size()) throw ConfigError("round counts differ");
    GapReport report;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].first != b[i].first) throw ConfigError("round numbering differs");
        GapPoint p;
        p.round = a[i].first;
        p.accuracy_a = a[i].second;
        p.accuracy_b = b[i].second;
        p.gap = p.accuracy_a - p.accuracy_b;
        report.points.push_back(p);
        report.max_abs_gap = std::max(report.max_abs_gap, std::abs(p.gap));
    }
    if (!report.points.empty()) report.final_gap = report.points.back().gap;
    return report;
}

}  // namespace partfed
