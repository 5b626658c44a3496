#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ean {

/// Binary vector gating the attention module of each residual block.
/// Serialized as a digit string, block 0 first (e.g. "101010").
class ConnectionScheme {
public:
    ConnectionScheme() = default;
    explicit ConnectionScheme(std::vector<std::uint8_t> bits, std::vector<int> stage_blocks = {});

    static ConnectionScheme zeros(std::size_t m);
    static ConnectionScheme ones(std::size_t m);
    static ConnectionScheme from_string(std::string_view digits, std::vector<int> stage_blocks = {});
    /// Bit i of `code` is block i.
    static ConnectionScheme from_index(std::uint64_t code, std::size_t m);

    std::string to_string() const;
    std::uint64_t to_index() const;

    std::size_t size() const noexcept { return bits_.size(); }
    std::size_t ones_count() const noexcept;
    bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
    void set(std::size_t i, bool on) { bits_.at(i) = on ? 1 : 0; }
    void flip(std::size_t i) { bits_.at(i) ^= 1; }
    ConnectionScheme complement() const;

    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
    const std::vector<int>& stage_blocks() const noexcept { return stage_blocks_; }
    std::vector<double> as_reals() const;

    /// Componentwise a <= b.
    bool subset_of(const ConnectionScheme& other) const;

    bool operator==(const ConnectionScheme& other) const { return bits_ == other.bits_; }
    /// Orders by digit string.
    std::strong_ordering operator<=>(const ConnectionScheme& other) const { return bits_ <=> other.bits_; }

private:
    std::vector<std::uint8_t> bits_;
    std::vector<int> stage_blocks_;
};

/// Each bit i.i.d. Bernoulli(beta).
ConnectionScheme sample_bernoulli_scheme(double beta, std::size_t m, std::mt19937_64& rng);

/// Uniform among schemes with exactly `ones` connections.
ConnectionScheme sample_fixed_ones(std::size_t m, std::size_t ones, std::mt19937_64& rng);

}  // namespace ean
