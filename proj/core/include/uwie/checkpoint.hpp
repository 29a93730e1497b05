#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uwie/network.hpp"

// Checkpoint layout (all integers and floats little-endian):
//
//   "UWIE" | u32 version (= 1) | u32 N | N bytes UTF-8 JSON manifest | f32 values
//
// The manifest is a JSON array of {"name", "shape", "kind"} objects in architecture order;
// values follow concatenated in the same order.
namespace uwie {

inline constexpr char kCheckpointMagic[4] = {'U', 'W', 'I', 'E'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams<float>& params);
// Throws CorruptCheckpointError; never returns partially filled parameters.
NetworkParams<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes through a temporary file and renames, so a failed save leaves no partial file.
void save_checkpoint(const NetworkParams<float>& params, const std::filesystem::path& path);
NetworkParams<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace uwie
