#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "uwie/tensor.hpp"

namespace uwie {

enum class ImageFormat { unknown, png, jpeg };

// Identifies PNG/JPEG by signature bytes, independent of the file extension.
ImageFormat sniff_format(std::span<const std::uint8_t> header);
ImageFormat sniff_file(const std::filesystem::path& path);

// Decodes PNG or JPEG into an RGB image with values v / 255. Grayscale is replicated and alpha
// dropped. Throws IoError naming the path on any read or decode failure.
Image load_image(const std::filesystem::path& path);

// round(clamp(v, 0, 1) * 255), halves rounded up.
std::uint8_t quantize(float v);

// Clamps, quantizes and writes an 8-bit RGB PNG.
void save_image(const Image& image, const std::filesystem::path& path);

// Bilinear resampling with half-pixel centers and edge clamping.
Image resize_bilinear(const Image& image, int height, int width);

}  // namespace uwie
