#include "partfed/dataset.hpp"

#include <map>
#include <stdexcept>

#include "partfed/rng.hpp"

namespace partfed {

std::vector<Sample> make_synthetic(const SyntheticCfg& cfg) {
    if (cfg.classes < 2 || cfg.samples < cfg.classes || cfg.dimension < 2)
        throw std::invalid_argument("bad synthetic dataset parameters");
    Rng rng(cfg.seed);
    const int free_dim = cfg.dimension - 1;
    std::vector<std::vector<double>> means(static_cast<std::size_t>(cfg.classes));
    for (auto& m : means) {
        m.resize(static_cast<std::size_t>(free_dim));
        for (double& v : m) v = cfg.separation * rng.normal();
    }
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(cfg.samples));
    for (int i = 0; i < cfg.samples; ++i) {
        const int label = i % cfg.classes;
        Sample s;
        s.label = label;
        s.features.resize(static_cast<std::size_t>(cfg.dimension));
        for (int d = 0; d < free_dim; ++d)
            s.features[static_cast<std::size_t>(d)] =
                means[static_cast<std::size_t>(label)][static_cast<std::size_t>(d)] + rng.normal();
        s.features.back() = 1.0;
        out.push_back(std::move(s));
    }
    return out;
}

IidSplit iid_split(const std::vector<Sample>& pool, int agents, uint64_t seed) {
    if (agents < 1) throw std::invalid_argument("agents must be >= 1");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool[i].label].push_back(i);
    Rng rng(seed);
    IidSplit split;
    split.shards.resize(static_cast<std::size_t>(agents));
    for (int a = 0; a < agents; ++a)
        split.shards[static_cast<std::size_t>(a)].owner = static_cast<uint32_t>(a + 1);
    for (auto& [label, idx] : by_class) {
        rng.shuffle(idx);
        const std::size_t per_agent = idx.size() / static_cast<std::size_t>(agents);
        std::size_t pos = 0;
        for (int a = 0; a < agents; ++a)
            for (std::size_t i = 0; i < per_agent; ++i)
                split.shards[static_cast<std::size_t>(a)].samples.push_back(pool[idx[pos++]]);
        for (; pos < idx.size(); ++pos) split.leftover.push_back(pool[idx[pos]]);
    }
    return split;
}

std::pair<std::vector<Sample>, std::vector<Sample>> eval_holdout(
    const std::vector<Sample>& pool, double fraction, uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw std::invalid_argument("eval fraction must be in (0,1)");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool[i].label].push_back(i);
    Rng rng(seed);
    std::vector<Sample> train, eval;
    for (auto& [label, idx] : by_class) {
        rng.shuffle(idx);
        std::size_t take = static_cast<std::size_t>(fraction * static_cast<double>(idx.size()));
        if (take == 0) take = 1;
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < take ? eval : train).push_back(pool[idx[i]]);
    }
    return {std::move(train), std::move(eval)};
}

}  // namespace partfed
