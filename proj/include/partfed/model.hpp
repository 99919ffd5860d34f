#pragma once

#include <cstdint>
#include <cstddef>
#include <utility>
#include <vector>

namespace partfed {

enum class LossKind { softmax_cross_entropy };

// Layer sizes are units per layer, input first. Only weight matrices are
// stored; the input width is expected to already include a constant-1 bias
// feature, so there are no separate bias vectors.
struct ModelSpec {
    std::vector<int> layer_sizes;
    LossKind loss = LossKind::softmax_cross_entropy;
    uint64_t seed = 0;

    std::size_t param_count() const;
    void validate() const;  // throws std::invalid_argument
};

// The full parameter vector W, laid out layer by layer, row-major.
using FlatWeights = std::vector<double>;

// One contiguous slice of W. Partition ids are 1-based.
struct SubVector {
    int partition_id = 0;
    std::size_t offset = 0;
    std::vector<double> values;
};

struct Sample {
    std::vector<double> features;
    int label = 0;
};

struct DatasetShard {
    std::vector<Sample> samples;
    uint32_t owner = 0;
};

struct TrainConfig {
    double learning_rate = 0.01;
    int batch_size = 32;
    int local_iterations = 1;
    uint64_t seed = 0;

    void validate() const;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Glorot-uniform initialization, deterministic per spec.seed.
FlatWeights init_weights(const ModelSpec& spec);

// Mean softmax-cross-entropy and argmax accuracy (ties go to the lowest
// class index).
EvalResult evaluate(const ModelSpec& spec, const FlatWeights& w, const DatasetShard& data);

// Runs cfg.local_iterations mini-batch SGD steps. Batches come from a
// Fisher-Yates shuffle reseeded at each pass over the shard; the input
// weights are left untouched.
FlatWeights sgd_fit(const ModelSpec& spec, const FlatWeights& w, const DatasetShard& data,
                    const TrainConfig& cfg);

// Mean loss over the batch and its analytic gradient (backprop). Exposed for
// the baseline and for gradient tests.
double loss_gradient(const ModelSpec& spec, const FlatWeights& w, const Sample* batch,
                     int batch_n, double* grad_out);

// The mini-batch index schedule sgd_fit follows, exposed so tests can replay
// it step by step.
std::vector<std::vector<int>> batch_schedule(int n, int batch_size, int iterations,
                                             uint64_t seed);

// (offset, length) per partition id 1..K: the first (total mod K) slices get
// the ceiling length, the rest the floor.
std::vector<std::pair<std::size_t, std::size_t>> partition_bounds(std::size_t total, int K);

std::vector<SubVector> slice(const FlatWeights& w, int K);

// Concatenation by offset. Throws "incomplete model" on gaps (or when
// expected_len is given and not met) and "overlap" on double coverage.
FlatWeights assemble(const std::vector<SubVector>& parts, std::size_t expected_len = 0);

}  // namespace partfed
