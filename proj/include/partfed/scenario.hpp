#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "partfed/agent.hpp"
#include "partfed/dataset.hpp"
#include "partfed/model.hpp"
#include "partfed/netsim.hpp"

namespace partfed {

enum class Engine { p2p, central };

enum class DatasetKind { synthetic, idx };

struct DatasetCfg {
    DatasetKind kind = DatasetKind::synthetic;
    SyntheticCfg synthetic;
    std::string images_path;
    std::string labels_path;
    int subsample = 0;
};

// Full experiment description. Everything that can influence a run lives
// here (including every seed), so a config determines its outputs byte for
// byte.
struct ScenarioConfig {
    std::string name = "scenario";
    int agents = 1;
    int K = 1;
    int pi = 1;
    int rho = 1;
    double alpha = 0.5;
    int rounds = 1;
    TrainConfig train;
    ModelSpec model;
    net::NetConfig net;
    SyncMode sync_mode = SyncMode::asynchronous;
    EpsilonMode epsilon_mode = EpsilonMode::ema;
    int64_t round_timeout_us = 100000;
    int64_t init_timeout_us = 20000;
    DatasetCfg dataset;
    double eval_fraction = 0.1;
    // Training stops once the global accuracy reaches this, like the
    // while-accuracy-below-threshold loop; > 1 disables the check.
    double accuracy_threshold = 2.0;
    Engine engine = Engine::p2p;
    bool per_agent_rows = false;
    uint64_t default_storage_offer = UINT64_MAX;
    std::map<uint32_t, uint64_t> storage_overrides;

    void validate() const;  // throws ConfigError
};

// Flat key=value text with dotted sections; '#' starts a comment. Later
// assignments win, which is how command-line overrides stack on top of a
// file or preset.
std::map<std::string, std::string> parse_kv_text(const std::string& text);
ScenarioConfig build_config(const std::map<std::string, std::string>& kv);
ScenarioConfig load_config_file(const std::string& path,
                                const std::vector<std::string>& overrides = {});
ScenarioConfig config_from_text(const std::string& text,
                                const std::vector<std::string>& overrides = {});

struct Preset {
    std::string name;
    std::string description;
    // (variant suffix, config text); multi-variant presets emit one CSV per
    // variant.
    std::vector<std::pair<std::string, std::string>> variants;
};

const std::vector<Preset>& presets();
const Preset* find_preset(const std::string& name);

// Dataset directory override for idx paths (relative paths resolve here).
std::string dataset_dir_from_env();

struct LoadedData {
    std::vector<DatasetShard> shards;
    DatasetShard eval;
};

// Seeded stratified eval holdout plus an equal-size IID split of the rest;
// per-class leftovers join the eval shard.
LoadedData load_dataset(const ScenarioConfig& cfg);

}  // namespace partfed
