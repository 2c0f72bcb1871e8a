#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "scsa/tensor.hpp"

namespace scsa {

// Multi-scale blob classification set. Class identity is the scale of the
// dominant Gaussian blob; distractor blobs at the other scales appear at a
// lower amplitude, so a classifier has to discriminate scale rather than
// mere presence.
struct SyntheticDatasetSpec {
    std::uint64_t seed = 0;
    std::size_t num_classes = 4;
    std::size_t samples_per_class = 50;
    std::size_t channels = 3;
    std::size_t height = 32;
    std::size_t width = 32;
    std::vector<double> blob_scales = {1.0, 2.0, 4.0, 8.0};
    double noise_sigma = 0.15;
    double distractor_amplitude = 0.3;

    void validate() const;
};

struct Dataset {
    Tensor images;  // [N,C,H,W]
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

// Deterministic in the seed, byte for byte. Split is 80/20 per class, so
// both halves stay exactly balanced.
std::pair<Dataset, Dataset> generate_dataset(const SyntheticDatasetSpec& spec);

std::uint64_t dataset_checksum(const Dataset& ds);

}  // namespace scsa
