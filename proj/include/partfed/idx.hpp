#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "partfed/model.hpp"

namespace partfed {

// IDX readers (the MNIST on-disk format). Big-endian headers; image bytes
// are scaled to [0,1] and a constant-1 bias feature is appended to every
// image vector.
std::vector<std::vector<double>> read_idx_images(const std::string& path);
std::vector<int> read_idx_labels(const std::string& path);

// Pairs images with labels; subsample > 0 keeps a stratified random subset
// of that size.
std::vector<Sample> load_idx(const std::string& images_path, const std::string& labels_path,
                             int subsample, uint64_t seed);

}  // namespace partfed
