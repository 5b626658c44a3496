#include "ean/scheme.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ean {

ConnectionScheme::ConnectionScheme(std::vector<std::uint8_t> bits, std::vector<int> stage_blocks)
    : bits_(std::move(bits)), stage_blocks_(std::move(stage_blocks)) {
    for (auto b : bits_) {
        if (b > 1) throw std::invalid_argument("connection scheme bits must be 0 or 1");
    }
    if (!stage_blocks_.empty()) {
        const int total = std::accumulate(stage_blocks_.begin(), stage_blocks_.end(), 0);
        if (total != static_cast<int>(bits_.size())) {
            throw std::invalid_argument("stage block counts sum to " + std::to_string(total) + " but scheme has " +
                                        std::to_string(bits_.size()) + " bits");
        }
    }
}

ConnectionScheme ConnectionScheme::zeros(std::size_t m) { return ConnectionScheme(std::vector<std::uint8_t>(m, 0)); }

ConnectionScheme ConnectionScheme::ones(std::size_t m) { return ConnectionScheme(std::vector<std::uint8_t>(m, 1)); }

ConnectionScheme ConnectionScheme::from_string(std::string_view digits, std::vector<int> stage_blocks) {
    std::vector<std::uint8_t> bits;
    bits.reserve(digits.size());
    for (char c : digits) {
        if (c != '0' && c != '1') {
            throw std::invalid_argument("connection scheme string may only contain 0/1, got '" + std::string(digits) + "'");
        }
        bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return ConnectionScheme(std::move(bits), std::move(stage_blocks));
}

ConnectionScheme ConnectionScheme::from_index(std::uint64_t code, std::size_t m) {
    if (m > 64) throw std::invalid_argument("from_index supports at most 64 blocks");
    std::vector<std::uint8_t> bits(m);
    for (std::size_t i = 0; i < m; ++i) bits[i] = static_cast<std::uint8_t>((code >> i) & 1u);
    return ConnectionScheme(std::move(bits));
}

std::string ConnectionScheme::to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = bits_[i] ? '1' : '0';
    return s;
}

std::uint64_t ConnectionScheme::to_index() const {
    if (bits_.size() > 64) throw std::invalid_argument("to_index supports at most 64 blocks");
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) code |= static_cast<std::uint64_t>(bits_[i]) << i;
    return code;
}

std::size_t ConnectionScheme::ones_count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

ConnectionScheme ConnectionScheme::complement() const {
    ConnectionScheme c = *this;
    for (auto& b : c.bits_) b ^= 1;
    return c;
}

std::vector<double> ConnectionScheme::as_reals() const { return {bits_.begin(), bits_.end()}; }

bool ConnectionScheme::subset_of(const ConnectionScheme& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i] && !other.bits_[i]) return false;
    }
    return true;
}

ConnectionScheme sample_bernoulli_scheme(double beta, std::size_t m, std::mt19937_64& rng) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0,1]");
    std::bernoulli_distribution coin(beta);
    std::vector<std::uint8_t> bits(m);
    for (auto& b : bits) b = coin(rng) ? 1 : 0;
    return ConnectionScheme(std::move(bits));
}

ConnectionScheme sample_fixed_ones(std::size_t m, std::size_t ones, std::mt19937_64& rng) {
    if (ones > m) throw std::invalid_argument("cannot place more connections than blocks");
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < ones; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, m - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<std::uint8_t> bits(m, 0);
    for (std::size_t i = 0; i < ones; ++i) bits[idx[i]] = 1;
    return ConnectionScheme(std::move(bits));
}

}  // namespace ean
