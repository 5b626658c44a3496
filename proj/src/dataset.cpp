#include "ean/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ean {

namespace {

void add_blob(Tensor& img, double cy, double cx, double sigma, double amplitude) {
    const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
            const double v = amplitude * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            for (std::size_t ch = 0; ch < c; ++ch) img.at(ch, y, x) += v;
        }
    }
}

}  // namespace

Dataset make_blob_dataset(const BlobSpec& spec, std::mt19937_64& rng) {
    if (spec.classes < 2) throw std::invalid_argument("blob dataset needs at least two classes");
    if (spec.channels == 0 || spec.height == 0 || spec.width == 0) throw std::invalid_argument("empty image shape");
    Dataset out;
    out.classes = spec.classes;
    out.input_shape = {spec.channels, spec.height, spec.width};

    const double mid_y = (static_cast<double>(spec.height) - 1.0) / 2.0;
    const double mid_x = (static_cast<double>(spec.width) - 1.0) / 2.0;
    const double radius = spec.ring_radius * static_cast<double>(std::min(spec.height, spec.width));
    std::normal_distribution<double> jitter(0.0, spec.jitter);
    std::normal_distribution<double> noise(0.0, spec.noise);
    std::uniform_real_distribution<double> amp(0.6, 1.0);
    std::uniform_real_distribution<double> where_y(0.0, static_cast<double>(spec.height) - 1.0);
    std::uniform_real_distribution<double> where_x(0.0, static_cast<double>(spec.width) - 1.0);
    std::bernoulli_distribution distract(spec.distractor_prob);
    std::uniform_int_distribution<std::size_t> label_dist(0, spec.classes - 1);

    out.samples.reserve(spec.count);
    for (std::size_t n = 0; n < spec.count; ++n) {
        const std::size_t label = label_dist(rng);
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(label) / static_cast<double>(spec.classes);
        Tensor img(out.input_shape);
        add_blob(img, mid_y + radius * std::sin(angle) + jitter(rng), mid_x + radius * std::cos(angle) + jitter(rng),
                 spec.blob_sigma, amp(rng));
        if (distract(rng)) add_blob(img, where_y(rng), where_x(rng), spec.blob_sigma, 0.5 * amp(rng));
        for (double& v : img.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);
        out.samples.push_back({std::move(img), label});
    }
    return out;
}

Split split_holdout(const Dataset& all, double validation_fraction) {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("validation fraction must lie in (0,1)");
    }
    const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(all.size())));
    if (n_val == 0 || n_val >= all.size()) throw std::invalid_argument("dataset too small to split");
    Split s;
    s.train.classes = s.validation.classes = all.classes;
    s.train.input_shape = s.validation.input_shape = all.input_shape;
    const std::size_t n_train = all.size() - n_val;
    s.train.samples.assign(all.samples.begin(), all.samples.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.samples.assign(all.samples.begin() + static_cast<std::ptrdiff_t>(n_train), all.samples.end());
    return s;
}

Dataset load_csv_dataset(const std::filesystem::path& path, const Shape& input_shape, std::size_t classes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    Dataset out;
    out.classes = classes;
    out.input_shape = input_shape;
    const std::size_t pixels = shape_volume(input_shape);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> values;
        while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
        if (values.size() != pixels + 1) {
            throw std::runtime_error(path.string() + ":" + std::to_string(row) + ": expected " +
                                     std::to_string(pixels + 1) + " fields, got " + std::to_string(values.size()));
        }
        const double label = values.front();
        if (label < 0 || label >= static_cast<double>(classes) || label != std::floor(label)) {
            throw std::runtime_error(path.string() + ":" + std::to_string(row) + ": bad label");
        }
        for (std::size_t i = 1; i < values.size(); ++i) {
            if (values[i] < 0.0 || values[i] > 1.0) {
                throw std::runtime_error(path.string() + ":" + std::to_string(row) + ": pixel outside [0,1]");
            }
        }
        out.samples.push_back({Tensor(input_shape, std::vector<double>(values.begin() + 1, values.end())),
                               static_cast<std::size_t>(label)});
    }
    return out;
}

void save_csv_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset " + path.string());
    out << std::setprecision(17);
    for (const auto& s : data.samples) {
        out << s.label;
        for (double v : s.image.data()) out << ',' << v;
        out << '\n';
    }
}

}  // namespace ean
