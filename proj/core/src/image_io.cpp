#include "uwie/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <jpeglib.h>
#include <png.h>

namespace uwie {

namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open file");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path, "read failed");
  return bytes;
}

Image from_rgba8(const std::vector<std::uint8_t>& pixels, int height, int width, int stride) {
  Image img(height, width, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::uint8_t* src = pixels.data() + (static_cast<std::size_t>(y) * width + x) * stride;
      for (int c = 0; c < 3; ++c) img(y, x, c) = static_cast<float>(src[c]) / 255.0f;
    }
  }
  return img;
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(path, "PNG decode failed: " + msg);
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(path, "PNG decode failed: " + msg);
  }
  return from_rgba8(pixels, static_cast<int>(image.height), static_cast<int>(image.width), 4);
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

// Returns false and fills `message` on failure. No C++ objects with destructors live between
// setjmp and the libjpeg calls that may longjmp.
bool decode_jpeg_raw(const std::vector<std::uint8_t>& bytes, std::vector<std::uint8_t>& pixels,
                     int& height, int& width, std::string& message) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_silent;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    message = err.message;
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  height = static_cast<int>(cinfo.output_height);
  width = static_cast<int>(cinfo.output_width);
  pixels.resize(static_cast<std::size_t>(height) * width * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

Image decode_jpeg(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::vector<std::uint8_t> pixels;
  int height = 0;
  int width = 0;
  std::string message;
  if (!decode_jpeg_raw(bytes, pixels, height, width, message)) {
    throw IoError(path, "JPEG decode failed: " + message);
  }
  if (height < 1 || width < 1) throw IoError(path, "JPEG has no pixels");
  return from_rgba8(pixels, height, width, 3);
}

}  // namespace

ImageFormat sniff_format(std::span<const std::uint8_t> header) {
  if (header.size() >= 8 && std::equal(std::begin(kPngSignature), std::end(kPngSignature),
                                       header.begin())) {
    return ImageFormat::png;
  }
  if (header.size() >= 3 && header[0] == 0xFF && header[1] == 0xD8 && header[2] == 0xFF) {
    return ImageFormat::jpeg;
  }
  return ImageFormat::unknown;
}

ImageFormat sniff_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return ImageFormat::unknown;
  std::uint8_t header[8] = {};
  in.read(reinterpret_cast<char*>(header), sizeof header);
  return sniff_format(std::span<const std::uint8_t>(header, static_cast<std::size_t>(in.gcount())));
}

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  switch (sniff_format(bytes)) {
    case ImageFormat::png: return decode_png(bytes, path);
    case ImageFormat::jpeg: return decode_jpeg(bytes, path);
    case ImageFormat::unknown: break;
  }
  throw IoError(path, "not a PNG or JPEG file");
}

std::uint8_t quantize(float v) {
  if (!(v > 0.0f)) return 0;  // also maps NaN to 0
  if (v >= 1.0f) return 255;
  return static_cast<std::uint8_t>(std::floor(static_cast<double>(v) * 255.0 + 0.5));
}

void save_image(const Image& image, const std::filesystem::path& path) {
  require(image.channels() == 3, "save_image: expected a 3-channel image");
  std::vector<std::uint8_t> pixels(image.size());
  const auto data = image.data();
  std::transform(data.begin(), data.end(), pixels.begin(), quantize);

  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(image.width());
  out.height = static_cast<png_uint_32>(image.height());
  out.format = PNG_FORMAT_RGB;
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  if (!png_image_write_to_file(&out, tmp.c_str(), 0, pixels.data(), 0, nullptr)) {
    const std::string msg = out.message;
    png_image_free(&out);
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw IoError(path, "PNG write failed: " + msg);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path, "cannot move image into place: " + ec.message());
}

Image resize_bilinear(const Image& image, int height, int width) {
  require(height >= 1 && width >= 1, "resize_bilinear: target dimensions must be positive");
  if (image.height() == height && image.width() == width) return image;
  const int ch = image.channels();
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;

  struct Tap {
    int lo, hi;
    float frac;
  };
  auto taps = [](int out_size, int in_size, double scale) {
    std::vector<Tap> t(static_cast<std::size_t>(out_size));
    for (int i = 0; i < out_size; ++i) {
      double src = (i + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
      const int lo = static_cast<int>(std::floor(src));
      const int hi = std::min(lo + 1, in_size - 1);
      t[i] = {lo, hi, static_cast<float>(src - lo)};
    }
    return t;
  };
  const auto ty = taps(height, image.height(), sy);
  const auto tx = taps(width, image.width(), sx);

  // a + f * (b - a) keeps constant regions exactly constant.
  auto lerp = [](float a, float b, float f) { return a + f * (b - a); };
  Image out(height, width, ch);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < ch; ++c) {
        const float top = lerp(image(ty[y].lo, tx[x].lo, c), image(ty[y].lo, tx[x].hi, c), tx[x].frac);
        const float bottom =
            lerp(image(ty[y].hi, tx[x].lo, c), image(ty[y].hi, tx[x].hi, c), tx[x].frac);
        out(y, x, c) = lerp(top, bottom, ty[y].frac);
      }
    }
  }
  return out;
}

}  // namespace uwie
