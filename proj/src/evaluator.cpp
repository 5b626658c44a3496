#include "ean/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>

#include "ean/supernet.hpp"

namespace ean {

namespace {

void check_len(const ConnectionScheme& a, std::size_t m) {
    if (a.size() != m) {
        throw std::invalid_argument("scheme has " + std::to_string(a.size()) + " bits, evaluator expects " +
                                    std::to_string(m));
    }
}

}  // namespace

SupernetEvaluator::SupernetEvaluator(const Supernet& net, const Dataset& validation)
    : net_(net), validation_(validation) {
    if (validation.samples.empty()) throw std::invalid_argument("validation set is empty");
    if (net.steps_trained == 0) {
        std::clog << "warning: supernet has not been pre-trained; proxy accuracies are degraded\n";
    }
}

std::size_t SupernetEvaluator::blocks() const { return net_.block_count(); }

double SupernetEvaluator::accuracy(const ConnectionScheme& a) const { return evaluate_scheme(net_, a, validation_); }

SyntheticLandscape::SyntheticLandscape(std::size_t blocks, std::uint64_t seed) : m_(blocks) {
    if (blocks == 0) throw std::invalid_argument("landscape needs at least one block");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    base_ = 0.70 + 0.1 * u(rng);
    sweet_ratio_ = 0.25 + 0.35 * u(rng);
    curvature_ = 0.3;
    // per-bit terms an order of magnitude below the ratio term
    h_.resize(m_);
    for (auto& v : h_) v = 0.01 * g(rng);
    j_.assign(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
        for (std::size_t k = i + 1; k < m_; ++k) j_[i * m_ + k] = 0.006 * g(rng);
    }
}

double SyntheticLandscape::accuracy(const ConnectionScheme& a) const {
    check_len(a, m_);
    const double ratio = static_cast<double>(a.ones_count()) / static_cast<double>(m_);
    double v = base_ - curvature_ * (ratio - sweet_ratio_) * (ratio - sweet_ratio_);
    for (std::size_t i = 0; i < m_; ++i) {
        if (!a[i]) continue;
        v += h_[i];
        for (std::size_t k = i + 1; k < m_; ++k) {
            if (a[k]) v += j_[i * m_ + k];
        }
    }
    return std::clamp(v, 0.0, 1.0);
}

PeakedLandscape::PeakedLandscape(ConnectionScheme peak, double sharpness)
    : peak_(std::move(peak)), sharpness_(sharpness) {
    if (peak_.size() == 0) throw std::invalid_argument("peak scheme is empty");
    if (!(sharpness > 0.0)) throw std::invalid_argument("sharpness must be > 0");
}

double PeakedLandscape::accuracy(const ConnectionScheme& a) const {
    check_len(a, peak_.size());
    std::size_t dist = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dist += a[i] != peak_[i];
    return std::exp(-sharpness_ * static_cast<double>(dist) / static_cast<double>(a.size()));
}

TableEvaluator::TableEvaluator(std::size_t blocks, std::vector<double> scores) : m_(blocks), scores_(std::move(scores)) {
    if (blocks > 20) throw std::invalid_argument("table evaluator supports at most 20 blocks");
    if (scores_.size() != (std::size_t{1} << blocks)) throw std::invalid_argument("score table must have 2^m entries");
}

double TableEvaluator::accuracy(const ConnectionScheme& a) const {
    check_len(a, m_);
    return scores_[a.to_index()];
}

}  // namespace ean
