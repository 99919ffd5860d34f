#pragma once

#include <cstdint>
#include <vector>

#include "partfed/model.hpp"

namespace partfed {

struct SyntheticCfg {
    int classes = 2;
    int samples = 100;
    int dimension = 3;  // includes the trailing constant-1 feature
    uint64_t seed = 0;
    double separation = 2.0;
};

// Gaussian class blobs: per-class means drawn from N(0, separation^2),
// unit-variance noise, labels dealt round-robin so classes are balanced.
// The last feature of every sample is the constant 1.
std::vector<Sample> make_synthetic(const SyntheticCfg& cfg);

struct IidSplit {
    std::vector<DatasetShard> shards;   // equal sizes, stratified per class
    std::vector<Sample> leftover;       // per-class remainders
};

// Equal-size IID split: per class, a seeded shuffle dealt evenly to the
// agents; what does not divide evenly is returned as leftover. Shard owners
// are agent ids 1..agents.
IidSplit iid_split(const std::vector<Sample>& pool, int agents, uint64_t seed);

// Stratified eval holdout of ~fraction*|pool|; returns (train pool, eval).
std::pair<std::vector<Sample>, std::vector<Sample>> eval_holdout(
    const std::vector<Sample>& pool, double fraction, uint64_t seed);

}  // namespace partfed
