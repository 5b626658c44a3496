#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ean {

/// Stream names used across the project. Each randomized component owns one
/// so that toggling a feature never shifts another component's draws.
namespace streams {
inline constexpr std::string_view kSupernetInit = "supernet-init";
inline constexpr std::string_view kSupernetMask = "supernet-mask";
inline constexpr std::string_view kSupernetData = "supernet-data";
inline constexpr std::string_view kDataset = "dataset";
inline constexpr std::string_view kControllerInit = "controller-init";
inline constexpr std::string_view kControllerSample = "controller-sample";
inline constexpr std::string_view kRndInit = "rnd-init";
inline constexpr std::string_view kGa = "ga";
inline constexpr std::string_view kStudy = "study";
inline constexpr std::string_view kLandscape = "landscape";
inline constexpr std::string_view kTheory = "theory";
}  // namespace streams

/// Deterministic seed for the named stream under a global seed.
std::uint64_t stream_seed(std::uint64_t global_seed, std::string_view name);

std::mt19937_64 make_stream(std::uint64_t global_seed, std::string_view name);

/// Seed of the index-th substream of `base`, for order-independent parallel work.
std::uint64_t substream_seed(std::uint64_t base, std::uint64_t index);

}  // namespace ean
