#include "partfed/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "partfed/kernels.hpp"
#include "partfed/rng.hpp"

namespace partfed {

std::size_t ModelSpec::param_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        total += static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1];
    return total;
}

void ModelSpec::validate() const {
    if (layer_sizes.size() < 2) throw std::invalid_argument("model needs at least two layers");
    for (int s : layer_sizes)
        if (s < 1) throw std::invalid_argument("layer sizes must be positive");
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (local_iterations < 0) throw std::invalid_argument("local_iterations must be non-negative");
}

FlatWeights init_weights(const ModelSpec& spec) {
    spec.validate();
    FlatWeights w(spec.param_count());
    Rng rng(spec.seed);
    std::size_t pos = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const int fan_in = spec.layer_sizes[l];
        const int fan_out = spec.layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        const std::size_t count = static_cast<std::size_t>(fan_in) * fan_out;
        for (std::size_t i = 0; i < count; ++i) w[pos++] = rng.uniform(-bound, bound);
    }
    return w;
}

namespace {

struct LayerView {
    const double* weights;  // fan_in x fan_out, row-major
    int fan_in;
    int fan_out;
};

std::vector<LayerView> layer_views(const ModelSpec& spec, const FlatWeights& w) {
    if (w.size() != spec.param_count())
        throw std::invalid_argument("weight vector length does not match model spec");
    std::vector<LayerView> views;
    std::size_t pos = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        LayerView v{w.data() + pos, spec.layer_sizes[l], spec.layer_sizes[l + 1]};
        views.push_back(v);
        pos += static_cast<std::size_t>(v.fan_in) * v.fan_out;
    }
    return views;
}

void check_sample_dims(const ModelSpec& spec, const Sample& s) {
    if (static_cast<int>(s.features.size()) != spec.layer_sizes.front())
        throw std::invalid_argument("feature dimension does not match model input");
    if (s.label < 0 || s.label >= spec.layer_sizes.back())
        throw std::invalid_argument("label out of range");
}

// Forward pass over a batch; activations[0] is the input matrix, hidden
// layers are ReLU, the last entry holds raw logits.
void forward(const std::vector<LayerView>& layers, const std::vector<double>& input,
             int batch_n, std::vector<std::vector<double>>& activations) {
    activations.resize(layers.size() + 1);
    activations[0] = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerView& lv = layers[l];
        activations[l + 1].assign(static_cast<std::size_t>(batch_n) * lv.fan_out, 0.0);
        gemm_nn(activations[l].data(), lv.weights, activations[l + 1].data(), batch_n,
                lv.fan_in, lv.fan_out);
        if (l + 1 < layers.size()) {
            for (double& v : activations[l + 1])
                if (v < 0.0) v = 0.0;
        }
    }
}

// Row-wise softmax cross-entropy. Returns summed loss; fills probabilities
// in place of the logits.
double softmax_xent(std::vector<double>& logits, const int* labels, int batch_n, int classes) {
    double loss_sum = 0.0;
    for (int b = 0; b < batch_n; ++b) {
        double* row = logits.data() + static_cast<std::size_t>(b) * classes;
        double mx = row[0];
        for (int j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < classes; ++j) denom += std::exp(row[j] - mx);
        loss_sum += std::log(denom) - (row[labels[b]] - mx);
        for (int j = 0; j < classes; ++j) row[j] = std::exp(row[j] - mx) / denom;
    }
    return loss_sum;
}

}  // namespace

EvalResult evaluate(const ModelSpec& spec, const FlatWeights& w, const DatasetShard& data) {
    spec.validate();
    const auto layers = layer_views(spec, w);
    const int classes = spec.layer_sizes.back();
    const int in_dim = spec.layer_sizes.front();
    if (data.samples.empty()) throw std::invalid_argument("empty shard");

    constexpr int kChunk = 256;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::vector<std::vector<double>> acts;
    std::vector<double> input;
    std::vector<int> labels;
    for (std::size_t start = 0; start < data.samples.size(); start += kChunk) {
        const int n = static_cast<int>(std::min<std::size_t>(kChunk, data.samples.size() - start));
        input.assign(static_cast<std::size_t>(n) * in_dim, 0.0);
        labels.resize(n);
        for (int b = 0; b < n; ++b) {
            const Sample& s = data.samples[start + b];
            check_sample_dims(spec, s);
            std::copy(s.features.begin(), s.features.end(),
                      input.begin() + static_cast<std::size_t>(b) * in_dim);
            labels[b] = s.label;
        }
        forward(layers, input, n, acts);
        std::vector<double>& logits = acts.back();
        for (int b = 0; b < n; ++b) {
            const double* row = logits.data() + static_cast<std::size_t>(b) * classes;
            int best = 0;
            for (int j = 1; j < classes; ++j)
                if (row[j] > row[best]) best = j;
            if (best == labels[b]) ++correct;
        }
        loss_sum += softmax_xent(logits, labels.data(), n, classes);
    }
    EvalResult r;
    r.loss = loss_sum / static_cast<double>(data.samples.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(data.samples.size());
    return r;
}

double loss_gradient(const ModelSpec& spec, const FlatWeights& w, const Sample* batch,
                     int batch_n, double* grad_out) {
    spec.validate();
    const auto layers = layer_views(spec, w);
    const int classes = spec.layer_sizes.back();
    const int in_dim = spec.layer_sizes.front();
    if (batch_n <= 0) throw std::invalid_argument("empty batch");

    std::vector<double> input(static_cast<std::size_t>(batch_n) * in_dim);
    std::vector<int> labels(batch_n);
    for (int b = 0; b < batch_n; ++b) {
        check_sample_dims(spec, batch[b]);
        std::copy(batch[b].features.begin(), batch[b].features.end(),
                  input.begin() + static_cast<std::size_t>(b) * in_dim);
        labels[b] = batch[b].label;
    }

    std::vector<std::vector<double>> acts;
    forward(layers, input, batch_n, acts);
    const double loss = softmax_xent(acts.back(), labels.data(), batch_n, classes) / batch_n;

    // d(loss)/d(logits) = (softmax - onehot) / batch_n
    std::vector<double> dz = acts.back();
    for (int b = 0; b < batch_n; ++b)
        dz[static_cast<std::size_t>(b) * classes + labels[b]] -= 1.0;
    const double inv_n = 1.0 / batch_n;
    for (double& v : dz) v *= inv_n;

    // Backward pass; gradient blocks share the flat layout of w.
    std::size_t grad_pos = w.size();
    std::vector<double> dh;
    for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
        const LayerView& lv = layers[static_cast<std::size_t>(l)];
        grad_pos -= static_cast<std::size_t>(lv.fan_in) * lv.fan_out;
        gemm_tn(acts[static_cast<std::size_t>(l)].data(), dz.data(), grad_out + grad_pos,
                lv.fan_in, batch_n, lv.fan_out);
        if (l > 0) {
            dh.assign(static_cast<std::size_t>(batch_n) * lv.fan_in, 0.0);
            gemm_nt(dz.data(), lv.weights, dh.data(), batch_n, lv.fan_out, lv.fan_in);
            const std::vector<double>& act = acts[static_cast<std::size_t>(l)];
            for (std::size_t i = 0; i < dh.size(); ++i)
                if (act[i] <= 0.0) dh[i] = 0.0;
            dz.swap(dh);
        }
    }
    return loss;
}

std::vector<std::vector<int>> batch_schedule(int n, int batch_size, int iterations,
                                             uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("empty shard");
    std::vector<std::vector<int>> schedule;
    schedule.reserve(static_cast<std::size_t>(iterations));
    Rng rng(seed);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    int pos = n;  // forces a shuffle before the first batch
    for (int step = 0; step < iterations; ++step) {
        if (pos >= n) {
            rng.shuffle(order);
            pos = 0;
        }
        const int end = std::min(pos + batch_size, n);
        schedule.emplace_back(order.begin() + pos, order.begin() + end);
        pos = end;
    }
    return schedule;
}

FlatWeights sgd_fit(const ModelSpec& spec, const FlatWeights& w, const DatasetShard& data,
                    const TrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (data.samples.empty()) throw std::invalid_argument("empty shard");
    FlatWeights out = w;
    if (cfg.local_iterations == 0) return out;

    const auto schedule = batch_schedule(static_cast<int>(data.samples.size()), cfg.batch_size,
                                         cfg.local_iterations, cfg.seed);
    std::vector<double> grad(w.size());
    std::vector<Sample> batch;
    for (const auto& idx : schedule) {
        batch.clear();
        for (int i : idx) batch.push_back(data.samples[static_cast<std::size_t>(i)]);
        loss_gradient(spec, out, batch.data(), static_cast<int>(batch.size()), grad.data());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= cfg.learning_rate * grad[i];
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> partition_bounds(std::size_t total, int K) {
    if (K < 1 || static_cast<std::size_t>(K) > total)
        throw std::invalid_argument("K out of range");
    std::vector<std::pair<std::size_t, std::size_t>> bounds;
    bounds.reserve(static_cast<std::size_t>(K));
    const std::size_t base = total / static_cast<std::size_t>(K);
    const std::size_t extra = total % static_cast<std::size_t>(K);
    std::size_t offset = 0;
    for (int k = 0; k < K; ++k) {
        const std::size_t len = base + (static_cast<std::size_t>(k) < extra ? 1 : 0);
        bounds.emplace_back(offset, len);
        offset += len;
    }
    return bounds;
}

std::vector<SubVector> slice(const FlatWeights& w, int K) {
    const auto bounds = partition_bounds(w.size(), K);
    std::vector<SubVector> parts;
    parts.reserve(bounds.size());
    for (int k = 0; k < K; ++k) {
        SubVector sv;
        sv.partition_id = k + 1;
        sv.offset = bounds[static_cast<std::size_t>(k)].first;
        const std::size_t len = bounds[static_cast<std::size_t>(k)].second;
        sv.values.assign(w.begin() + static_cast<long>(sv.offset),
                         w.begin() + static_cast<long>(sv.offset + len));
        parts.push_back(std::move(sv));
    }
    return parts;
}

FlatWeights assemble(const std::vector<SubVector>& parts, std::size_t expected_len) {
    std::vector<const SubVector*> sorted;
    sorted.reserve(parts.size());
    for (const SubVector& p : parts) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(),
              [](const SubVector* a, const SubVector* b) { return a->offset < b->offset; });
    std::size_t cursor = 0;
    std::size_t total = 0;
    for (const SubVector* p : sorted) total += p->values.size();
    FlatWeights w;
    w.reserve(total);
    for (const SubVector* p : sorted) {
        if (p->offset < cursor) throw std::invalid_argument("overlap");
        if (p->offset > cursor) throw std::invalid_argument("incomplete model");
        w.insert(w.end(), p->values.begin(), p->values.end());
        cursor += p->values.size();
    }
    if (expected_len > 0 && cursor != expected_len)
        throw std::invalid_argument("incomplete model");
    return w;
}

}  // namespace partfed
