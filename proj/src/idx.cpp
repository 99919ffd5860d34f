#include "partfed/idx.hpp"

#include <fstream>
#include <map>

#include "partfed/errors.hpp"
#include "partfed/rng.hpp"

namespace partfed {

namespace {

uint32_t read_u32_be(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw IoError("truncated IDX header: " + path);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

}  // namespace

std::vector<std::vector<double>> read_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open IDX image file: " + path);
    if (read_u32_be(in, path) != 0x00000803u)
        throw IoError("bad IDX image magic in " + path);
    const uint32_t count = read_u32_be(in, path);
    const uint32_t rows = read_u32_be(in, path);
    const uint32_t cols = read_u32_be(in, path);
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096)
        throw IoError("bad IDX image dimensions in " + path);
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> raw(pixels);
    std::vector<std::vector<double>> images;
    images.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels)))
            throw IoError("truncated IDX image data in " + path);
        std::vector<double> img(pixels + 1);
        for (std::size_t p = 0; p < pixels; ++p) img[p] = raw[p] / 255.0;
        img[pixels] = 1.0;  // bias feature
        images.push_back(std::move(img));
    }
    return images;
}

std::vector<int> read_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open IDX label file: " + path);
    if (read_u32_be(in, path) != 0x00000801u)
        throw IoError("bad IDX label magic in " + path);
    const uint32_t count = read_u32_be(in, path);
    std::vector<unsigned char> raw(count);
    if (count > 0 &&
        !in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count)))
        throw IoError("truncated IDX label data in " + path);
    return std::vector<int>(raw.begin(), raw.end());
}

std::vector<Sample> load_idx(const std::string& images_path, const std::string& labels_path,
                             int subsample, uint64_t seed) {
    auto images = read_idx_images(images_path);
    auto labels = read_idx_labels(labels_path);
    if (images.size() != labels.size())
        throw IoError("IDX image/label counts differ: " + images_path);
    std::vector<Sample> all;
    all.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i)
        all.push_back(Sample{std::move(images[i]), labels[i]});
    if (subsample <= 0 || static_cast<std::size_t>(subsample) >= all.size()) return all;

    // Stratified subsample: per-class proportional counts, seeded selection.
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < all.size(); ++i) by_class[all[i].label].push_back(i);
    Rng rng(seed);
    std::vector<std::size_t> picked;
    std::size_t want = static_cast<std::size_t>(subsample);
    for (auto& [label, idx] : by_class) {
        rng.shuffle(idx);
        std::size_t take = want * idx.size() / all.size();
        if (take > idx.size()) take = idx.size();
        picked.insert(picked.end(), idx.begin(), idx.begin() + static_cast<long>(take));
    }
    // Rounding shortfall: top up from a global shuffle of the rest.
    if (picked.size() < want) {
        std::vector<char> used(all.size(), 0);
        for (std::size_t i : picked) used[i] = 1;
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < all.size(); ++i)
            if (!used[i]) rest.push_back(i);
        rng.shuffle(rest);
        for (std::size_t i = 0; i < rest.size() && picked.size() < want; ++i)
            picked.push_back(rest[i]);
    }
    std::sort(picked.begin(), picked.end());
    std::vector<Sample> out;
    out.reserve(picked.size());
    for (std::size_t i : picked) out.push_back(std::move(all[i]));
    return out;
}

}  // namespace partfed
