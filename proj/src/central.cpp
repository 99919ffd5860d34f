#include "partfed/central.hpp"

#include <algorithm>
#include <stdexcept>

#include "partfed/rng.hpp"

namespace partfed {

FlatWeights central_round(const ModelSpec& spec, const FlatWeights& w,
                          const std::vector<DatasetShard>& shards, const TrainConfig& cfg,
                          int round) {
    if (shards.empty()) throw std::invalid_argument("empty shard list");

    std::vector<std::size_t> order(shards.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return shards[a].owner < shards[b].owner;
    });

    std::vector<FlatWeights> locals(shards.size());
    // Per-agent fits are independent and deterministic, so they can run in
    // parallel; only the summation order below is pinned.
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(order.size()); ++i) {
        const DatasetShard& shard = shards[order[static_cast<std::size_t>(i)]];
        TrainConfig tc = cfg;
        tc.seed = mix_seed(cfg.seed, shard.owner, static_cast<uint64_t>(round));
        locals[static_cast<std::size_t>(i)] = sgd_fit(spec, w, shard, tc);
    }

    FlatWeights mean(w.size(), 0.0);
    for (const FlatWeights& local : locals)  // ascending agent-id order
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += local[j];
    const double inv = 1.0 / static_cast<double>(locals.size());
    for (double& v : mean) v *= inv;
    return mean;
}

std::vector<CentralRoundRecord> central_train(const ModelSpec& spec,
                                              const std::vector<DatasetShard>& shards,
                                              const TrainConfig& cfg, int rounds,
                                              const DatasetShard& eval_shard) {
    std::vector<CentralRoundRecord> records;
    FlatWeights w = init_weights(spec);
    EvalResult e = evaluate(spec, w, eval_shard);
    records.push_back(CentralRoundRecord{0, w, e.accuracy, e.loss});
    for (int r = 1; r <= rounds; ++r) {
        w = central_round(spec, w, shards, cfg, r);
        e = evaluate(spec, w, eval_shard);
        records.push_back(CentralRoundRecord{r, w, e.accuracy, e.loss});
    }
    return records;
}

}  // namespace partfed
