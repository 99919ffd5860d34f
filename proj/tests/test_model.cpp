#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "partfed/model.hpp"
#include "partfed/rng.hpp"

using namespace partfed;

namespace {

// Straight-line reference forward pass, independent of the kernel path:
// plain per-sample loops, ReLU hidden layers, softmax cross-entropy.
double ref_sample_loss(const ModelSpec& spec, const FlatWeights& w, const Sample& s) {
    std::vector<double> act = s.features;
    std::size_t pos = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const int in = spec.layer_sizes[l];
        const int out = spec.layer_sizes[l + 1];
        std::vector<double> next(static_cast<std::size_t>(out), 0.0);
        for (int j = 0; j < out; ++j)
            for (int i = 0; i < in; ++i)
                next[static_cast<std::size_t>(j)] +=
                    act[static_cast<std::size_t>(i)] * w[pos + static_cast<std::size_t>(i) * out + j];
        pos += static_cast<std::size_t>(in) * out;
        if (l + 2 < spec.layer_sizes.size())
            for (double& v : next) v = std::max(0.0, v);
        act = std::move(next);
    }
    double mx = act[0];
    for (double v : act) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : act) denom += std::exp(v - mx);
    return std::log(denom) - (act[static_cast<std::size_t>(s.label)] - mx);
}

double ref_mean_loss(const ModelSpec& spec, const FlatWeights& w,
                     const std::vector<Sample>& samples) {
    double total = 0.0;
    for (const Sample& s : samples) total += ref_sample_loss(spec, w, s);
    return total / static_cast<double>(samples.size());
}

// Central finite differences of the reference loss.
std::vector<double> fd_gradient(const ModelSpec& spec, const FlatWeights& w,
                                const std::vector<Sample>& samples, double h = 1e-6) {
    std::vector<double> grad(w.size());
    FlatWeights probe = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        probe[i] = w[i] + h;
        const double up = ref_mean_loss(spec, probe, samples);
        probe[i] = w[i] - h;
        const double down = ref_mean_loss(spec, probe, samples);
        probe[i] = w[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

std::vector<Sample> random_samples(Rng& rng, int n, int dim, int classes) {
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) {
        Sample s;
        s.features.resize(static_cast<std::size_t>(dim));
        for (double& f : s.features) f = rng.uniform(-1.0, 1.0);
        s.features.back() = 1.0;
        s.label = static_cast<int>(rng.below(static_cast<uint64_t>(classes)));
        out.push_back(std::move(s));
    }
    return out;
}

bool grad_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({1e-7, std::abs(a[i]), std::abs(b[i])});
        if (std::abs(a[i] - b[i]) / scale > tol) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("init_weights is deterministic and layer sizes give the parameter count") {
    ModelSpec tiny{{2, 1}, LossKind::softmax_cross_entropy, 7};
    const FlatWeights a = init_weights(tiny);
    const FlatWeights b = init_weights(tiny);
    CHECK(a.size() == 2);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);

    ModelSpec mnist{{785, 500, 100, 10}, LossKind::softmax_cross_entropy, 0};
    CHECK(mnist.param_count() == 443500);
    CHECK(init_weights(mnist).size() == 443500);

    ModelSpec small{{2, 3}, LossKind::softmax_cross_entropy, 0};
    CHECK(init_weights(small).size() == 6);
}

TEST_CASE("init_weights stays within the per-layer bound") {
    ModelSpec spec{{6, 4, 3}, LossKind::softmax_cross_entropy, 99};
    const FlatWeights w = init_weights(spec);
    const double b1 = std::sqrt(6.0 / (6 + 4));
    const double b2 = std::sqrt(6.0 / (4 + 3));
    for (std::size_t i = 0; i < 24; ++i) CHECK(std::abs(w[i]) <= b1);
    for (std::size_t i = 24; i < w.size(); ++i) CHECK(std::abs(w[i]) <= b2);
}

TEST_CASE("evaluate with all-zero weights gives the uniform-softmax loss") {
    ModelSpec spec{{5, 10}, LossKind::softmax_cross_entropy, 0};
    Rng rng(11);
    DatasetShard shard;
    shard.samples = random_samples(rng, 40, 5, 10);
    const FlatWeights zeros(spec.param_count(), 0.0);
    const EvalResult e = evaluate(spec, zeros, shard);
    CHECK(std::abs(e.loss - std::log(10.0)) < 1e-9);

    // Ties break toward the lowest class index, so accuracy is the empirical
    // frequency of class 0.
    int zeros_count = 0;
    for (const Sample& s : shard.samples) zeros_count += s.label == 0 ? 1 : 0;
    CHECK(e.accuracy ==
          doctest::Approx(static_cast<double>(zeros_count) / shard.samples.size()));
}

TEST_CASE("evaluate matches the brute-force per-sample recomputation") {
    Rng rng(21);
    ModelSpec spec{{4, 6, 3}, LossKind::softmax_cross_entropy, 5};
    const FlatWeights w = init_weights(spec);
    DatasetShard shard;
    shard.samples = random_samples(rng, 33, 4, 3);
    const EvalResult e = evaluate(spec, w, shard);
    CHECK(e.loss == doctest::Approx(ref_mean_loss(spec, w, shard.samples)).epsilon(1e-12));
    CHECK(e.loss >= 0.0);
    CHECK(e.accuracy >= 0.0);
    CHECK(e.accuracy <= 1.0);
}

TEST_CASE("evaluate rejects dimension mismatches") {
    ModelSpec spec{{4, 3}, LossKind::softmax_cross_entropy, 0};
    DatasetShard shard;
    shard.samples.push_back(Sample{{1.0, 2.0}, 0});  // wrong width
    CHECK_THROWS(evaluate(spec, FlatWeights(spec.param_count(), 0.0), shard));
}

TEST_CASE("analytic gradients match central finite differences on random small models") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        // Keep models at <= 30 parameters.
        const int dim = 2 + static_cast<int>(rng.below(3));
        const int classes = 2 + static_cast<int>(rng.below(2));
        std::vector<int> layers;
        if (rng.below(2) == 0) {
            layers = {dim, classes};
        } else {
            const int hidden = 2 + static_cast<int>(rng.below(2));
            if (dim * hidden + hidden * classes > 30) {
                layers = {dim, classes};
            } else {
                layers = {dim, hidden, classes};
            }
        }
        ModelSpec spec{layers, LossKind::softmax_cross_entropy, static_cast<uint64_t>(1000 + trial)};
        const FlatWeights w = init_weights(spec);
        const auto batch = random_samples(rng, 6, dim, classes);

        std::vector<double> grad(w.size());
        loss_gradient(spec, w, batch.data(), static_cast<int>(batch.size()), grad.data());
        const auto fd = fd_gradient(spec, w, batch);
        CHECK(grad_close(grad, fd, 1e-5));
    }
}

TEST_CASE("sgd_fit with zero iterations is the identity") {
    ModelSpec spec{{3, 2}, LossKind::softmax_cross_entropy, 3};
    Rng rng(41);
    DatasetShard shard;
    shard.samples = random_samples(rng, 8, 3, 2);
    const FlatWeights w = init_weights(spec);
    TrainConfig cfg{0.1, 4, 0, 9};
    const FlatWeights out = sgd_fit(spec, w, shard, cfg);
    CHECK(std::memcmp(w.data(), out.data(), w.size() * sizeof(double)) == 0);
}

TEST_CASE("one full-batch step equals w minus lr times the finite-difference gradient") {
    ModelSpec spec{{3, 4, 2}, LossKind::softmax_cross_entropy, 17};
    Rng rng(51);
    DatasetShard shard;
    shard.samples = random_samples(rng, 12, 3, 2);
    const FlatWeights w = init_weights(spec);
    TrainConfig cfg{0.1, 12, 1, 5};
    const FlatWeights out = sgd_fit(spec, w, shard, cfg);
    const auto fd = fd_gradient(spec, w, shard.samples);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double expected = w[i] - cfg.learning_rate * fd[i];
        const double scale = std::max({1e-7, std::abs(out[i]), std::abs(expected)});
        CHECK(std::abs(out[i] - expected) / scale < 1e-5);
    }
}

TEST_CASE("sgd_fit is deterministic and leaves its input untouched") {
    ModelSpec spec{{3, 3}, LossKind::softmax_cross_entropy, 19};
    Rng rng(61);
    DatasetShard shard;
    shard.samples = random_samples(rng, 20, 3, 3);
    const FlatWeights w = init_weights(spec);
    const FlatWeights w_copy = w;
    TrainConfig cfg{0.05, 4, 7, 23};
    const FlatWeights a = sgd_fit(spec, w, shard, cfg);
    const FlatWeights b = sgd_fit(spec, w, shard, cfg);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(w.data(), w_copy.data(), w.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.data(), w.data(), w.size() * sizeof(double)) != 0);
}

TEST_CASE("sgd_fit rejects an empty shard") {
    ModelSpec spec{{3, 3}, LossKind::softmax_cross_entropy, 19};
    TrainConfig cfg{0.05, 4, 7, 23};
    CHECK_THROWS_WITH(sgd_fit(spec, init_weights(spec), DatasetShard{}, cfg), "empty shard");
}

TEST_CASE("sgd_fit replays step by step from the exposed batch schedule") {
    ModelSpec spec{{3, 4, 3}, LossKind::softmax_cross_entropy, 71};
    Rng rng(71);
    DatasetShard shard;
    shard.samples = random_samples(rng, 10, 3, 3);
    TrainConfig cfg{1e-6, 4, 5, 77};
    const FlatWeights w0 = init_weights(spec);
    const FlatWeights fitted = sgd_fit(spec, w0, shard, cfg);

    FlatWeights w = w0;
    std::vector<double> grad(w.size());
    double max_norm = 0.0;
    const auto schedule =
        batch_schedule(static_cast<int>(shard.samples.size()), cfg.batch_size,
                       cfg.local_iterations, cfg.seed);
    for (const auto& idx : schedule) {
        std::vector<Sample> batch;
        for (int i : idx) batch.push_back(shard.samples[static_cast<std::size_t>(i)]);
        loss_gradient(spec, w, batch.data(), static_cast<int>(batch.size()), grad.data());
        double norm = 0.0;
        for (double g : grad) norm += g * g;
        max_norm = std::max(max_norm, std::sqrt(norm));
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * grad[i];
    }
    CHECK(std::memcmp(w.data(), fitted.data(), w.size() * sizeof(double)) == 0);

    // Step-size bound: the total drift is at most lr * iterations * the
    // largest batch-gradient norm seen on the shard.
    double drift = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = fitted[i] - w0[i];
        drift += d * d;
    }
    drift = std::sqrt(drift);
    CHECK(drift <= cfg.learning_rate * cfg.local_iterations * max_norm * (1.0 + 1e-12));
}

TEST_CASE("slice produces the documented lengths and offsets") {
    FlatWeights w6{1, 2, 3, 4, 5, 6};
    const auto six = slice(w6, 6);
    REQUIRE(six.size() == 6);
    for (int k = 0; k < 6; ++k) {
        CHECK(six[static_cast<std::size_t>(k)].partition_id == k + 1);
        CHECK(six[static_cast<std::size_t>(k)].values.size() == 1);
    }

    FlatWeights w7{1, 2, 3, 4, 5, 6, 7};
    const auto two = slice(w7, 2);
    REQUIRE(two.size() == 2);
    CHECK(two[0].values.size() == 4);
    CHECK(two[0].offset == 0);
    CHECK(two[1].values.size() == 3);
    CHECK(two[1].offset == 4);

    CHECK_THROWS(slice(w7, 0));
    CHECK_THROWS(slice(w7, 8));
}

TEST_CASE("slice/assemble round-trips bitwise on random cases") {
    Rng rng(81);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(1000);
        FlatWeights w(n);
        for (double& v : w) v = rng.uniform(-10.0, 10.0);
        const int K = 1 + static_cast<int>(rng.below(n));
        auto parts = slice(w, K);
        rng.shuffle(parts);  // assembly is order-independent
        const FlatWeights back = assemble(parts, n);
        CHECK(std::memcmp(w.data(), back.data(), n * sizeof(double)) == 0);
    }
}

TEST_CASE("assemble rejects gaps and duplicates") {
    FlatWeights w{1, 2, 3, 4, 5, 6};
    auto parts = slice(w, 3);

    auto missing = parts;
    missing.erase(missing.begin() + 1);
    CHECK_THROWS_WITH(assemble(missing), "incomplete model");

    auto tail_missing = parts;
    tail_missing.pop_back();
    CHECK_THROWS_WITH(assemble(tail_missing, w.size()), "incomplete model");

    auto duplicated = parts;
    duplicated.push_back(parts[1]);
    CHECK_THROWS_WITH(assemble(duplicated), "overlap");
}
