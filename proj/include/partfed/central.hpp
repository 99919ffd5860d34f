#pragma once

#include <vector>

#include "partfed/model.hpp"

namespace partfed {

struct CentralRoundRecord {
    int round = 0;
    FlatWeights global_weights;
    double accuracy = 0.0;
    double loss = 0.0;
};

// One server-orchestrated round: every agent fits from w on its own shard
// (seeded per (agent, round) exactly like the decentralized run), the server
// takes the unweighted elementwise mean in ascending agent-id order.
FlatWeights central_round(const ModelSpec& spec, const FlatWeights& w,
                          const std::vector<DatasetShard>& shards, const TrainConfig& cfg,
                          int round);

// Iterates central_round, recording loss/accuracy on the eval shard each
// round. Record 0 is the initial model.
std::vector<CentralRoundRecord> central_train(const ModelSpec& spec,
                                              const std::vector<DatasetShard>& shards,
                                              const TrainConfig& cfg, int rounds,
                                              const DatasetShard& eval_shard);

}  // namespace partfed
