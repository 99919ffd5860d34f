#include "partfed/scenario.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "partfed/errors.hpp"
#include "partfed/idx.hpp"
#include "partfed/rng.hpp"

namespace partfed {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
    try {
        return std::stoi(v);
    } catch (...) {
        throw ConfigError("bad integer for " + key + ": " + v);
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        return std::stod(v);
    } catch (...) {
        throw ConfigError("bad number for " + key + ": " + v);
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    if (v == "unlimited") return UINT64_MAX;
    try {
        return std::stoull(v);
    } catch (...) {
        throw ConfigError("bad unsigned for " + key + ": " + v);
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t next = s.find(sep, pos);
        if (next == std::string::npos) next = s.size();
        out.push_back(trim(s.substr(pos, next - pos)));
        pos = next + 1;
    }
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " is not key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key on config line " + std::to_string(lineno));
        kv[key] = value;
    }
    return kv;
}

ScenarioConfig build_config(const std::map<std::string, std::string>& kv) {
    ScenarioConfig cfg;
    for (const auto& [key, v] : kv) {
        if (key == "name") cfg.name = v;
        else if (key == "agents") cfg.agents = to_int(key, v);
        else if (key == "partitions") cfg.K = to_int(key, v);
        else if (key == "pi") cfg.pi = to_int(key, v);
        else if (key == "rho") cfg.rho = to_int(key, v);
        else if (key == "alpha") cfg.alpha = to_double(key, v);
        else if (key == "rounds") cfg.rounds = to_int(key, v);
        else if (key == "sync_mode") {
            if (v == "sync") cfg.sync_mode = SyncMode::synchronous;
            else if (v == "async") cfg.sync_mode = SyncMode::asynchronous;
            else throw ConfigError("sync_mode must be sync or async");
        } else if (key == "epsilon_mode") {
            if (v == "ema") cfg.epsilon_mode = EpsilonMode::ema;
            else if (v == "fixed") cfg.epsilon_mode = EpsilonMode::fixed_inverse_r;
            else throw ConfigError("epsilon_mode must be ema or fixed");
        } else if (key == "engine") {
            if (v == "p2p") cfg.engine = Engine::p2p;
            else if (v == "central") cfg.engine = Engine::central;
            else throw ConfigError("engine must be p2p or central");
        } else if (key == "round_timeout_ms") cfg.round_timeout_us = static_cast<int64_t>(to_double(key, v) * 1000.0);
        else if (key == "init_timeout_ms") cfg.init_timeout_us = static_cast<int64_t>(to_double(key, v) * 1000.0);
        else if (key == "eval_fraction") cfg.eval_fraction = to_double(key, v);
        else if (key == "accuracy_threshold") cfg.accuracy_threshold = to_double(key, v);
        else if (key == "metrics.per_agent") cfg.per_agent_rows = (v == "true" || v == "1");
        else if (key == "split") {
            if (v != "iid") throw ConfigError("only the iid split is supported");
        } else if (key == "model.layers") {
            cfg.model.layer_sizes.clear();
            for (const std::string& part : split(v, ','))
                cfg.model.layer_sizes.push_back(to_int(key, part));
        } else if (key == "model.seed") cfg.model.seed = to_u64(key, v);
        else if (key == "train.learning_rate") cfg.train.learning_rate = to_double(key, v);
        else if (key == "train.batch_size") cfg.train.batch_size = to_int(key, v);
        else if (key == "train.local_iterations") cfg.train.local_iterations = to_int(key, v);
        else if (key == "train.seed") cfg.train.seed = to_u64(key, v);
        else if (key == "dataset.kind") {
            if (v == "synthetic") cfg.dataset.kind = DatasetKind::synthetic;
            else if (v == "idx") cfg.dataset.kind = DatasetKind::idx;
            else throw ConfigError("dataset.kind must be synthetic or idx");
        } else if (key == "dataset.classes") cfg.dataset.synthetic.classes = to_int(key, v);
        else if (key == "dataset.samples") cfg.dataset.synthetic.samples = to_int(key, v);
        else if (key == "dataset.dimension") cfg.dataset.synthetic.dimension = to_int(key, v);
        else if (key == "dataset.seed") cfg.dataset.synthetic.seed = to_u64(key, v);
        else if (key == "dataset.separation") cfg.dataset.synthetic.separation = to_double(key, v);
        else if (key == "dataset.images") cfg.dataset.images_path = v;
        else if (key == "dataset.labels") cfg.dataset.labels_path = v;
        else if (key == "dataset.subsample") cfg.dataset.subsample = to_int(key, v);
        else if (key == "net.latency_mean_ms") cfg.net.latency_mean_us = static_cast<int64_t>(to_double(key, v) * 1000.0);
        else if (key == "net.latency_jitter_ms") cfg.net.latency_jitter_us = static_cast<int64_t>(to_double(key, v) * 1000.0);
        else if (key == "net.drop_prob") cfg.net.drop_prob = to_double(key, v);
        else if (key == "net.seed") cfg.net.seed = to_u64(key, v);
        else if (key == "net.disconnects") {
            cfg.net.disconnects.clear();
            if (!v.empty()) {
                for (const std::string& entry : split(v, ';')) {
                    const auto fields = split(entry, ':');
                    if (fields.size() != 4)
                        throw ConfigError("disconnect entries are agent:from:to:memory|memoryless");
                    net::NetConfig::Disconnect d;
                    d.agent = static_cast<net::AgentId>(to_int(key, fields[0]));
                    d.from_round = to_int(key, fields[1]);
                    d.to_round = to_int(key, fields[2]);
                    if (fields[3] == "memory") d.with_memory = true;
                    else if (fields[3] == "memoryless") d.with_memory = false;
                    else throw ConfigError("disconnect memory flag must be memory or memoryless");
                    cfg.net.disconnects.push_back(d);
                }
            }
        } else if (key == "storage.default") cfg.default_storage_offer = to_u64(key, v);
        else if (key.rfind("storage.agent", 0) == 0) {
            const uint32_t agent = static_cast<uint32_t>(to_int(key, key.substr(13)));
            cfg.storage_overrides[agent] = to_u64(key, v);
        } else {
            throw ConfigError("unknown config key: " + key);
        }
    }
    cfg.validate();
    return cfg;
}

void ScenarioConfig::validate() const {
    if (agents < 1) throw ConfigError("agents must be >= 1");
    if (K < 1) throw ConfigError("partitions must be >= 1");
    if (pi < 1 || pi > K) throw ConfigError("pi must be in [1, partitions]");
    if (rho < 1) throw ConfigError("rho must be >= 1");
    if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("alpha must be in (0,1)");
    if (rounds < 0) throw ConfigError("rounds must be >= 0");
    if (eval_fraction <= 0.0 || eval_fraction >= 1.0)
        throw ConfigError("eval_fraction must be in (0,1)");
    if (net.drop_prob < 0.0 || net.drop_prob >= 1.0)
        throw ConfigError("net.drop_prob must be in [0,1)");
    if (round_timeout_us <= 0) throw ConfigError("round_timeout_ms must be positive");
    if (init_timeout_us <= 0) throw ConfigError("init_timeout_ms must be positive");
    for (const auto& d : net.disconnects) {
        if (d.from_round > d.to_round) throw ConfigError("disconnect from_round > to_round");
        if (d.agent == 0 || d.agent > static_cast<uint32_t>(agents))
            throw ConfigError("disconnect for unknown agent");
    }
    try {
        model.validate();
        train.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (model.param_count() < static_cast<std::size_t>(K))
        throw ConfigError("more partitions than parameters");
    if (dataset.kind == DatasetKind::idx &&
        (dataset.images_path.empty() || dataset.labels_path.empty()))
        throw ConfigError("idx dataset needs dataset.images and dataset.labels");
}

ScenarioConfig config_from_text(const std::string& text,
                                const std::vector<std::string>& overrides) {
    auto kv = parse_kv_text(text);
    for (const std::string& ov : overrides) {
        auto extra = parse_kv_text(ov);
        for (auto& [k, v] : extra) kv[k] = v;
    }
    return build_config(kv);
}

ScenarioConfig load_config_file(const std::string& path,
                                const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_text(buf.str(), overrides);
}

std::string dataset_dir_from_env() {
    const char* dir = std::getenv("PARTFED_DATA_DIR");
    return dir ? dir : "";
}

LoadedData load_dataset(const ScenarioConfig& cfg) {
    std::vector<Sample> pool;
    if (cfg.dataset.kind == DatasetKind::synthetic) {
        SyntheticCfg sc = cfg.dataset.synthetic;
        if (sc.dimension != cfg.model.layer_sizes.front())
            throw ConfigError("dataset.dimension must equal the model input width");
        pool = make_synthetic(sc);
    } else {
        std::string images = cfg.dataset.images_path;
        std::string labels = cfg.dataset.labels_path;
        const std::string dir = dataset_dir_from_env();
        if (!dir.empty() && !images.empty() && images.front() != '/') images = dir + "/" + images;
        if (!dir.empty() && !labels.empty() && labels.front() != '/') labels = dir + "/" + labels;
        pool = load_idx(images, labels, cfg.dataset.subsample,
                        mix_seed(cfg.dataset.synthetic.seed, 0x1d));
        if (!pool.empty() &&
            static_cast<int>(pool.front().features.size()) != cfg.model.layer_sizes.front())
            throw ConfigError("IDX feature width does not match the model input");
    }
    auto [train_pool, eval_samples] =
        eval_holdout(pool, cfg.eval_fraction, mix_seed(cfg.dataset.synthetic.seed, 0xe7a1));
    IidSplit split = iid_split(train_pool, cfg.agents, mix_seed(cfg.dataset.synthetic.seed, 0x5911));
    for (Sample& s : split.leftover) eval_samples.push_back(std::move(s));

    LoadedData out;
    out.shards = std::move(split.shards);
    out.eval.owner = 0;
    out.eval.samples = std::move(eval_samples);
    for (const DatasetShard& shard : out.shards)
        if (static_cast<int>(shard.samples.size()) < cfg.train.batch_size)
            throw ConfigError("shard smaller than batch size");
    return out;
}

namespace {

// Built-in experiment presets. Training hyperparameters are desk-scale
// calibration values, not reported ones.
const char* kParity4 = R"(
name = parity-4
agents = 4
partitions = 4
pi = 1
rho = 1
alpha = 0.5
rounds = 20
sync_mode = sync
epsilon_mode = fixed
round_timeout_ms = 50
init_timeout_ms = 20
eval_fraction = 0.2
model.layers = 11,8,3
model.seed = 101
train.learning_rate = 0.05
train.batch_size = 16
train.local_iterations = 4
train.seed = 202
dataset.kind = synthetic
dataset.classes = 3
dataset.samples = 1200
dataset.dimension = 11
dataset.seed = 303
dataset.separation = 0.8
net.latency_mean_ms = 0
net.latency_jitter_ms = 0
net.drop_prob = 0
net.seed = 404
)";

const char* kParity10 = R"(
name = parity-10
agents = 10
partitions = 10
pi = 2
rho = 2
alpha = 0.5
rounds = 40
sync_mode = async
epsilon_mode = ema
round_timeout_ms = 100
init_timeout_ms = 20
eval_fraction = 0.1
model.layers = 21,32,16,5
model.seed = 111
train.learning_rate = 0.05
train.batch_size = 32
train.local_iterations = 8
train.seed = 222
dataset.kind = synthetic
dataset.classes = 5
dataset.samples = 6000
dataset.dimension = 21
dataset.seed = 333
dataset.separation = 0.7
net.latency_mean_ms = 0
net.latency_jitter_ms = 0
net.drop_prob = 0
net.seed = 444
)";

const char* kParity10Mnist = R"(
name = parity-10-mnist
agents = 10
partitions = 10
pi = 2
rho = 2
alpha = 0.5
rounds = 40
sync_mode = async
epsilon_mode = ema
round_timeout_ms = 100
init_timeout_ms = 20
eval_fraction = 0.1
model.layers = 785,500,100,10
model.seed = 111
train.learning_rate = 0.1
train.batch_size = 32
train.local_iterations = 10
train.seed = 222
dataset.kind = idx
dataset.images = train-images-idx3-ubyte
dataset.labels = train-labels-idx1-ubyte
dataset.subsample = 6000
dataset.seed = 333
net.latency_mean_ms = 0
net.latency_jitter_ms = 0
net.drop_prob = 0
net.seed = 444
)";

const char* kRhoBase = R"(
agents = 8
partitions = 8
alpha = 0.5
rounds = 40
sync_mode = async
epsilon_mode = ema
round_timeout_ms = 100
init_timeout_ms = 20
eval_fraction = 0.1
model.layers = 21,32,16,5
model.seed = 111
train.learning_rate = 0.05
train.batch_size = 32
train.local_iterations = 8
train.seed = 555
dataset.kind = synthetic
dataset.classes = 5
dataset.samples = 6000
dataset.dimension = 21
dataset.seed = 666
dataset.separation = 0.7
net.seed = 777
)";

const char* kChurnBase = R"(
agents = 8
partitions = 8
pi = 2
rho = 2
alpha = 0.5
rounds = 40
sync_mode = async
epsilon_mode = ema
round_timeout_ms = 100
init_timeout_ms = 20
eval_fraction = 0.1
model.layers = 21,32,16,5
model.seed = 111
train.learning_rate = 0.05
train.batch_size = 32
train.local_iterations = 8
train.seed = 888
dataset.kind = synthetic
dataset.classes = 5
dataset.samples = 6000
dataset.dimension = 21
dataset.seed = 999
dataset.separation = 0.7
net.latency_mean_ms = 0
net.latency_jitter_ms = 0
net.drop_prob = 0
net.seed = 1010
)";

const char* kParticipationBase = R"(
partitions = 10
pi = 1
rho = 1
alpha = 0.5
rounds = 40
sync_mode = async
epsilon_mode = ema
round_timeout_ms = 100
init_timeout_ms = 20
eval_fraction = 0.1
model.layers = 21,32,16,5
model.seed = 111
train.learning_rate = 0.05
train.batch_size = 32
train.local_iterations = 8
train.seed = 1212
dataset.kind = synthetic
dataset.classes = 5
dataset.samples = 6000
dataset.dimension = 21
dataset.seed = 1313
dataset.separation = 0.55
net.latency_mean_ms = 0
net.latency_jitter_ms = 0
net.drop_prob = 0
net.seed = 1414
)";

const char* kReplicaAgreement = R"(
name = replica-agreement
agents = 8
partitions = 8
pi = 4
rho = 4
alpha = 0.5
rounds = 15
sync_mode = sync
epsilon_mode = ema
round_timeout_ms = 50
init_timeout_ms = 20
eval_fraction = 0.2
model.layers = 21,32,16,5
model.seed = 111
train.learning_rate = 0.05
train.batch_size = 32
train.local_iterations = 8
train.seed = 1515
dataset.kind = synthetic
dataset.classes = 5
dataset.samples = 3000
dataset.dimension = 21
dataset.seed = 1616
dataset.separation = 0.7
net.latency_mean_ms = 0
net.latency_jitter_ms = 0
net.drop_prob = 0
net.seed = 1717
)";

std::string with(const std::string& base, const std::string& extra) { return base + extra; }

std::vector<Preset> make_presets() {
    std::vector<Preset> out;
    out.push_back(Preset{
        "parity-4",
        "4 agents, rho=1, synchronous, perfect net, epsilon fixed at 1/r; pairs with a "
        "centralized run for the model-equality check",
        {{"p2p", kParity4}, {"central", with(kParity4, "engine = central\nname = parity-4-central\n")}}});
    out.push_back(Preset{
        "parity-10",
        "10 agents, rho=2, asynchronous, perfect net, 40 rounds; pairs with a centralized "
        "run for the accuracy-gap summary",
        {{"p2p", kParity10},
         {"central", with(kParity10, "engine = central\nname = parity-10-central\n")}}});
    out.push_back(Preset{
        "parity-10-mnist",
        "parity-10 on an MNIST IDX subsample (set PARTFED_DATA_DIR to the IDX files)",
        {{"p2p", kParity10Mnist},
         {"central", with(kParity10Mnist, "engine = central\nname = parity-10-mnist-central\n")}}});
    out.push_back(Preset{
        "rho-compare",
        "8 agents: rho=1 perfect, rho=4 perfect, rho=4 imperfect connectivity (drop 0.2, "
        "latency tail past the round timeout)",
        {{"rho1-perfect", with(kRhoBase, "name = rho1-perfect\npi = 1\nrho = 1\n"
                                          "net.latency_mean_ms = 0\nnet.latency_jitter_ms = 0\n"
                                          "net.drop_prob = 0\n")},
         {"rho4-perfect", with(kRhoBase, "name = rho4-perfect\npi = 4\nrho = 4\n"
                                          "net.latency_mean_ms = 0\nnet.latency_jitter_ms = 0\n"
                                          "net.drop_prob = 0\n")},
         {"rho4-imperfect", with(kRhoBase,
                                 "name = rho4-imperfect\npi = 4\nrho = 4\n"
                                 "net.latency_mean_ms = 55.556\nnet.latency_jitter_ms = 55.556\n"
                                 "net.drop_prob = 0.2\n")}}});
    out.push_back(Preset{
        "churn",
        "8 agents, rho=2; half the agents disconnect for rounds 10-15: fault-free baseline, "
        "with-memory and memoryless reconnection",
        {{"baseline", with(kChurnBase, "name = churn-baseline\n")},
         {"memory", with(kChurnBase,
                         "name = churn-memory\n"
                         "net.disconnects = 5:10:15:memory;6:10:15:memory;7:10:15:memory;8:10:15:memory\n")},
         {"memoryless", with(kChurnBase,
                             "name = churn-memoryless\n"
                             "net.disconnects = 5:10:15:memoryless;6:10:15:memoryless;"
                             "7:10:15:memoryless;8:10:15:memoryless\n")}}});
    out.push_back(Preset{
        "participation",
        "one fixed synthetic dataset split among 2 vs 5 vs 10 agents",
        {{"2", with(kParticipationBase, "name = participation-2\nagents = 2\n")},
         {"5", with(kParticipationBase, "name = participation-5\nagents = 5\n")},
         {"10", with(kParticipationBase, "name = participation-10\nagents = 10\n")}}});
    out.push_back(Preset{"replica-agreement",
                         "8 agents, rho=4, synchronous, perfect net; holders must agree bitwise",
                         {{"p2p", kReplicaAgreement}}});
    return out;
}

}  // namespace

const std::vector<Preset>& presets() {
    static const std::vector<Preset> all = make_presets();
    return all;
}

const Preset* find_preset(const std::string& name) {
    for (const Preset& p : presets())
        if (p.name == name) return &p;
    return nullptr;
}

}  // namespace partfed
