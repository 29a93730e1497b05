#include "uwie/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace uwie {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

nlohmann::json manifest_json() {
  auto arr = nlohmann::json::array();
  for (const auto& info : architecture_manifest()) {
    arr.push_back({{"name", info.name}, {"shape", info.shape}, {"kind", to_string(info.kind)}});
  }
  return arr;
}

void validate_manifest(const nlohmann::json& manifest) {
  const auto& expected = architecture_manifest();
  if (!manifest.is_array()) throw CorruptCheckpointError("checkpoint manifest is not a JSON array");
  if (manifest.size() != expected.size()) {
    throw CorruptCheckpointError("checkpoint manifest lists " + std::to_string(manifest.size()) +
                                 " buffers, expected " + std::to_string(expected.size()));
  }
  for (std::size_t n = 0; n < expected.size(); ++n) {
    const auto& entry = manifest[n];
    const auto& want = expected[n];
    if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string() ||
        !entry.contains("shape") || !entry["shape"].is_array() || !entry.contains("kind") ||
        !entry["kind"].is_string()) {
      throw CorruptCheckpointError("checkpoint manifest entry " + std::to_string(n) +
                                   " is malformed (expected layer " + want.name + ")");
    }
    const auto name = entry["name"].get<std::string>();
    if (name != want.name) {
      throw CorruptCheckpointError("checkpoint manifest entry " + std::to_string(n) + " is '" +
                                   name + "', expected layer " + want.name);
    }
    std::vector<int> shape;
    for (const auto& d : entry["shape"]) {
      if (!d.is_number_integer()) {
        throw CorruptCheckpointError("layer " + want.name + ": non-integer shape entry");
      }
      shape.push_back(d.get<int>());
    }
    if (shape != want.shape) {
      throw CorruptCheckpointError("layer " + want.name + " has shape " + shape_string(shape) +
                                   ", expected " + shape_string(want.shape));
    }
    if (entry["kind"].get<std::string>() != to_string(want.kind)) {
      throw CorruptCheckpointError("layer " + want.name + " has kind '" +
                                   entry["kind"].get<std::string>() + "', expected '" +
                                   to_string(want.kind) + "'");
    }
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams<float>& params) {
  params.validate();
  const std::string manifest = manifest_json().dump();
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  out.insert(out.end(), manifest.begin(), manifest.end());
  for (const auto& buffer : params.buffers()) {
    for (const float v : buffer) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

NetworkParams<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t kHeader = 12;
  if (bytes.size() < kHeader) throw CorruptCheckpointError("checkpoint truncated in header");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CorruptCheckpointError("bad checkpoint magic (expected \"UWIE\")");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw CorruptCheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t manifest_len = get_u32(bytes.data() + 8);
  if (bytes.size() - kHeader < manifest_len) {
    throw CorruptCheckpointError("checkpoint truncated in manifest");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + kHeader,
                                     bytes.begin() + static_cast<std::ptrdiff_t>(kHeader + manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpointError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  validate_manifest(manifest);

  const std::size_t expected_values = architecture_parameter_count();
  const std::size_t payload = bytes.size() - kHeader - manifest_len;
  if (payload < expected_values * 4) {
    throw CorruptCheckpointError("checkpoint truncated: " + std::to_string(payload) +
                                 " payload bytes, expected " +
                                 std::to_string(expected_values * 4));
  }
  if (payload > expected_values * 4) {
    throw CorruptCheckpointError("checkpoint has " + std::to_string(payload - expected_values * 4) +
                                 " trailing bytes");
  }

  auto params = NetworkParams<float>::zeros();
  const std::uint8_t* p = bytes.data() + kHeader + manifest_len;
  for (auto buffer : params.buffers()) {
    for (float& v : buffer) {
      v = std::bit_cast<float>(get_u32(p));
      p += 4;
    }
  }
  return params;
}

void save_checkpoint(const NetworkParams<float>& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open checkpoint for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw IoError(path, "checkpoint write failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

NetworkParams<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open checkpoint");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CorruptCheckpointError& e) {
    throw CorruptCheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace uwie
