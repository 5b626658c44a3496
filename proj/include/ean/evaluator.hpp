#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ean/scheme.hpp"

namespace ean {

class Supernet;
struct Dataset;

/// Maps a connection scheme to a validation-accuracy-like score in [0,1].
/// Implementations must be deterministic and safe to call concurrently.
class SchemeEvaluator {
public:
    virtual ~SchemeEvaluator() = default;
    virtual std::size_t blocks() const = 0;
    virtual double accuracy(const ConnectionScheme& a) const = 0;
};

/// Proxy accuracy of a subnetwork of a pre-trained supernet.
class SupernetEvaluator final : public SchemeEvaluator {
public:
    /// Warns (once, on construction) if the supernet has never been trained.
    SupernetEvaluator(const Supernet& net, const Dataset& validation);
    std::size_t blocks() const override;
    double accuracy(const ConnectionScheme& a) const override;

private:
    const Supernet& net_;
    const Dataset& validation_;
};

/// Seeded pseudo-accuracy: a sweet spot in the connection ratio plus small
/// per-bit and pairwise terms, so no single bit dominates.
class SyntheticLandscape final : public SchemeEvaluator {
public:
    SyntheticLandscape(std::size_t blocks, std::uint64_t seed);
    std::size_t blocks() const override { return m_; }
    double accuracy(const ConnectionScheme& a) const override;

    const std::vector<double>& linear() const noexcept { return h_; }

private:
    std::size_t m_;
    double base_;
    double sweet_ratio_;
    double curvature_;
    std::vector<double> h_;
    std::vector<double> j_;  // upper triangle, row-major m x m
};

/// exp(-sharpness * hamming(a, peak) / m): one clear optimum.
class PeakedLandscape final : public SchemeEvaluator {
public:
    PeakedLandscape(ConnectionScheme peak, double sharpness);
    std::size_t blocks() const override { return peak_.size(); }
    double accuracy(const ConnectionScheme& a) const override;
    const ConnectionScheme& peak() const noexcept { return peak_; }

private:
    ConnectionScheme peak_;
    double sharpness_;
};

/// 1 for exactly one scheme, 0 for every other.
class NeedleEvaluator final : public SchemeEvaluator {
public:
    explicit NeedleEvaluator(ConnectionScheme needle) : needle_(std::move(needle)) {}
    std::size_t blocks() const override { return needle_.size(); }
    double accuracy(const ConnectionScheme& a) const override { return a == needle_ ? 1.0 : 0.0; }

private:
    ConnectionScheme needle_;
};

/// Scores kept from a pre-computed table indexed by ConnectionScheme::to_index.
class TableEvaluator final : public SchemeEvaluator {
public:
    TableEvaluator(std::size_t blocks, std::vector<double> scores);
    std::size_t blocks() const override { return m_; }
    double accuracy(const ConnectionScheme& a) const override;

private:
    std::size_t m_;
    std::vector<double> scores_;
};

}  // namespace ean
