#include "ean/rng.hpp"

namespace ean {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t global_seed, std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(global_seed) ^ h);
}

std::mt19937_64 make_stream(std::uint64_t global_seed, std::string_view name) {
    return std::mt19937_64(stream_seed(global_seed, name));
}

std::uint64_t substream_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(splitmix64(base) + 0x632be59bd9b4e019ULL * (index + 1));
}

}  // namespace ean
