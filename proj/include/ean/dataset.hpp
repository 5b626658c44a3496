#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <vector>

#include "ean/tensor.hpp"

namespace ean {

struct Sample {
    Tensor image;  // [C,H,W], pixels in [0,1]
    std::size_t label = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t classes = 0;
    Shape input_shape;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
};

/// Gaussian class blobs rendered as images. Class k places a blob near a
/// point on a ring around the image centre; the position is jittered and
/// pixel noise is added, then pixels are clipped to [0,1].
struct BlobSpec {
    std::size_t classes = 4;
    std::size_t channels = 1;
    std::size_t height = 8;
    std::size_t width = 8;
    std::size_t count = 600;
    double ring_radius = 0.25;  // fraction of the image side
    double blob_sigma = 1.2;    // pixels
    double jitter = 1.0;        // pixels, stddev of the centre offset
    double noise = 0.25;        // stddev of additive pixel noise
    double distractor_prob = 0.5;
};

Dataset make_blob_dataset(const BlobSpec& spec, std::mt19937_64& rng);

/// The first `1 - validation_fraction` of samples train, the rest validate.
struct Split {
    Dataset train;
    Dataset validation;
};
Split split_holdout(const Dataset& all, double validation_fraction);

/// CSV: one row per sample, label first, then pixels row-major in [0,1].
Dataset load_csv_dataset(const std::filesystem::path& path, const Shape& input_shape, std::size_t classes);
void save_csv_dataset(const Dataset& data, const std::filesystem::path& path);

}  // namespace ean
