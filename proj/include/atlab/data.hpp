#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atlab/tensor.hpp"

namespace atlab {

// Immutable after construction. Inputs live in [0,1]^d, one label per row.
struct Dataset {
    Tensor inputs;            // [n, d]
    std::vector<int> labels;  // size n, values in [0, classes)
    int classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return inputs.cols(); }
};

// Checks the [0,1] box, label cardinality and label range. Every generator
// and loader runs this before returning.
void validate_dataset(const Dataset& d);

// Two interleaving half-circles with Gaussian jitter, rescaled into [0,1]^2
// by a fixed affine map and clipped. n must be even; classes are balanced.
Dataset make_two_moons(std::size_t n, double noise_sd, std::uint64_t seed);

// Isotropic Gaussian clusters around the given centers (all inside [0,1]^d),
// clipped into the unit box; label = center index, assigned round-robin.
Dataset make_blobs(std::size_t n, const std::vector<std::vector<double>>& centers, double spread_sd,
                   std::uint64_t seed);

// IDX (MNIST distribution format): big-endian, magic-typed. Accepts 3-D
// ubyte images (magic 0x00000803) and 1-D ubyte labels (0x00000801) only.
// Pixels are scaled by 1/255; images are flattened row-major to [n, rows*cols].
Dataset load_idx(const std::string& images_path, const std::string& labels_path, std::size_t limit);

// Reads just the header and returns (count, rows, cols) for images or
// (count, 0, 0) for labels. Used by config validation.
struct IdxHeader {
    std::uint32_t magic = 0;
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};
IdxHeader read_idx_header(const std::string& path);

// CSV with header x0..x{d-1},label; full double precision.
void write_dataset_csv(const Dataset& d, const std::string& path);

}  // namespace atlab
