#include "scsa/dataset.hpp"

#include <bit>
#include <cmath>

#include "scsa/error.hpp"
#include "scsa/rng.hpp"

namespace scsa {

void SyntheticDatasetSpec::validate() const {
    if (num_classes < 2) throw ConfigError("dataset: need at least two classes");
    if (blob_scales.size() != num_classes) {
        throw ConfigError("dataset: blob_scales length " + std::to_string(blob_scales.size()) +
                          " != num_classes " + std::to_string(num_classes));
    }
    if (samples_per_class == 0) throw ConfigError("dataset: samples_per_class must be >= 1");
    if (channels == 0 || height == 0 || width == 0) {
        throw ConfigError("dataset: image extents must be positive");
    }
    const double limit = static_cast<double>(std::min(height, width));
    for (double s : blob_scales) {
        if (s <= 0.0) throw ConfigError("dataset: blob scales must be positive");
        if (s >= limit) {
            throw ConfigError("dataset: blob radius " + std::to_string(s) +
                              " does not fit a " + std::to_string(height) + "x" +
                              std::to_string(width) + " image");
        }
    }
    if (noise_sigma < 0.0) throw ConfigError("dataset: noise_sigma must be >= 0");
}

namespace {

void add_blob(Tensor& img, std::size_t C, std::size_t H, std::size_t W, double cy, double cx,
              double sigma, double amplitude) {
    // channel weights fall off so the channels stay correlated but distinct
    for (std::size_t c = 0; c < C; ++c) {
        const double cw = 1.0 - 0.25 * static_cast<double>(c % 3);
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t w = 0; w < W; ++w) {
                const double dy = static_cast<double>(h) - cy;
                const double dx = static_cast<double>(w) - cx;
                img.at4(0, c, h, w) +=
                    amplitude * cw * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            }
    }
}

}  // namespace

std::pair<Dataset, Dataset> generate_dataset(const SyntheticDatasetSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t C = spec.channels, H = spec.height, W = spec.width;
    const std::size_t val_per_class = std::max<std::size_t>(1, spec.samples_per_class / 5);
    const std::size_t train_per_class = spec.samples_per_class - val_per_class;

    Dataset train, val;
    train.images = Tensor(Shape{train_per_class * spec.num_classes, C, H, W});
    val.images = Tensor(Shape{val_per_class * spec.num_classes, C, H, W});

    auto center_for = [&](double sigma) {
        const double m = std::min(sigma, (std::min(H, W) - 1) / 2.0 - 1.0);
        const double margin = std::max(1.0, m);
        return std::pair<double, double>{rng.uniform(margin, H - 1 - margin),
                                         rng.uniform(margin, W - 1 - margin)};
    };

    std::size_t train_idx = 0, val_idx = 0;
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            Tensor img(Shape{1, C, H, W});
            const auto [cy, cx] = center_for(spec.blob_scales[k]);
            add_blob(img, C, H, W, cy, cx, spec.blob_scales[k], 1.0);
            for (std::size_t j = 0; j < spec.num_classes; ++j) {
                if (j == k) continue;
                const auto [dy, dx] = center_for(spec.blob_scales[j]);
                add_blob(img, C, H, W, dy, dx, spec.blob_scales[j], spec.distractor_amplitude);
            }
            if (spec.noise_sigma > 0.0) {
                for (auto& v : img.data) v += rng.normal(0.0, spec.noise_sigma);
            }
            const bool to_val = s >= train_per_class;
            Dataset& dst = to_val ? val : train;
            std::size_t& idx = to_val ? val_idx : train_idx;
            std::copy(img.data.begin(), img.data.end(), dst.images.data.begin() + idx * C * H * W);
            dst.labels.push_back(static_cast<int>(k));
            ++idx;
        }
    }
    return {std::move(train), std::move(val)};
}

std::uint64_t dataset_checksum(const Dataset& ds) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    for (double v : ds.images.data) mix(std::bit_cast<std::uint64_t>(v));
    for (int lab : ds.labels) mix(static_cast<std::uint64_t>(lab));
    return h;
}

}  // namespace scsa
