#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ean/supernet.hpp"

namespace ean {

/// Binary checkpoint layout (all integers and floats little-endian):
///   magic "EANCKPT1" | u32 version | u32 digest length | digest bytes |
///   u64 steps_trained | u32 blob count |
///   per blob: u32 name length | name | u32 rank | u64 dims[rank] | f64 data[]
/// Every parameter contributes two blobs: "<name>" and "<name>.momentum".
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Supernet& net, const std::string& config_digest, const std::filesystem::path& path);

/// Rebuilds a supernet for `config` and fills it from the file. Throws when
/// the stored digest differs from `expected_digest` or a blob is missing.
Supernet load_checkpoint(const BackboneConfig& config, const std::string& expected_digest,
                         const std::filesystem::path& path);

/// Reads only the digest stored in a checkpoint header.
std::string read_checkpoint_digest(const std::filesystem::path& path);

}  // namespace ean
