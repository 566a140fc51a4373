#pragma once

#include <png.h>

#include <atomic>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "extremeforge/error.hpp"
#include "extremeforge/image.hpp"

namespace extremeforge {

namespace fs = std::filesystem;

enum class ImageFormat { png, ppm };

inline ImageFormat format_from_extension(const fs::path& path) {
  auto ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".png") return ImageFormat::png;
  if (ext == ".ppm") return ImageFormat::ppm;
  throw Error(ErrorCode::UnsupportedFormat, path.string() + ": extension must be .png or .ppm");
}

inline std::string_view extension_for(ImageFormat format) {
  return format == ImageFormat::png ? ".png" : ".ppm";
}

inline std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return bytes;
}

// Writes to a sibling temp file and renames it over the target, so readers
// never observe a half-written file.
inline void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  static std::atomic<std::uint64_t> counter{0};
  auto tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ignore;
      fs::remove(tmp, ignore);
      throw Error(ErrorCode::IoError, "short write to " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw Error(ErrorCode::IoError, "rename to " + path.string() + " failed: " + ec.message());
  }
}

inline void write_file_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace detail {

inline std::vector<std::uint8_t> interleave_rgb(const ImageBuffer& img) {
  std::vector<std::uint8_t> rgb(img.width() * img.height() * 3);
  std::size_t i = 0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c) rgb[i++] = quantize(img.at(c, x, y));
  return rgb;
}

inline ImageBuffer deinterleave_rgb(const std::uint8_t* rgb, std::size_t width,
                                    std::size_t height) {
  ImageBuffer img(width, height);
  std::size_t i = 0;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, x, y) = dequantize(rgb[i++]);
  return img;
}

// Netpbm header tokenizer: whitespace separated, '#' comments run to EOL.
class PpmHeaderReader {
 public:
  PpmHeaderReader(std::span<const std::uint8_t> bytes, const std::string& name)
      : bytes_(bytes), name_(name) {}

  std::size_t next_number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw Error(ErrorCode::CorruptHeader, name_ + ": expected a number in PPM header");
    }
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > (1u << 24)) throw Error(ErrorCode::CorruptHeader, name_ + ": header value too large");
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(ErrorCode::CorruptHeader, name_ + ": missing whitespace before raster");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::string name_;
  std::size_t pos_ = 2;
};

inline ImageBuffer decode_ppm(std::span<const std::uint8_t> bytes, const std::string& name) {
  PpmHeaderReader header(bytes, name);
  const std::size_t width = header.next_number();
  const std::size_t height = header.next_number();
  const std::size_t maxval = header.next_number();
  if (width == 0 || height == 0) throw Error(ErrorCode::CorruptHeader, name + ": zero dimension");
  if (maxval != 255) {
    throw Error(ErrorCode::UnsupportedFormat, name + ": only maxval 255 PPM is supported");
  }
  const std::size_t offset = header.raster_offset();
  if (bytes.size() < offset + width * height * 3) {
    throw Error(ErrorCode::CorruptHeader, name + ": raster shorter than header dimensions");
  }
  return deinterleave_rgb(bytes.data() + offset, width, height);
}

inline ImageBuffer decode_png(std::span<const std::uint8_t> bytes, const std::string& name) {
  // IHDR is always the first chunk: signature(8) len(4) type(4) w(4) h(4) depth(1).
  if (bytes.size() < 33) throw Error(ErrorCode::CorruptHeader, name + ": truncated PNG header");
  if (bytes[24] == 16) {
    throw Error(ErrorCode::UnsupportedFormat, name + ": 16-bit PNG is not supported");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::CorruptHeader, name + ": " + msg);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::CorruptHeader, name + ": " + msg);
  }
  return deinterleave_rgb(rgb.data(), image.width, image.height);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  auto rgb = detail::interleave_rgb(img);
  bytes.insert(bytes.end(), rgb.begin(), rgb.end());
  return bytes;
}

inline std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
  auto rgb = detail::interleave_rgb(img);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, rgb.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::IoError, "PNG encode failed: " + msg);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::IoError, "PNG encode failed: " + msg);
  }
  out.resize(size);
  return out;
}

inline std::vector<std::uint8_t> encode_image(const ImageBuffer& img, ImageFormat format) {
  return format == ImageFormat::png ? encode_png(img) : encode_ppm(img);
}

// Format is sniffed from magic bytes, not the extension.
inline ImageBuffer decode_image(std::span<const std::uint8_t> bytes, const std::string& name) {
  static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngMagic, kPngMagic + 8, bytes.begin())) {
    return detail::decode_png(bytes, name);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    return detail::decode_ppm(bytes, name);
  }
  throw Error(ErrorCode::UnsupportedFormat, name + ": not an 8-bit PNG or binary PPM (P6)");
}

inline ImageBuffer load_image(const fs::path& path) {
  auto bytes = read_file_bytes(path);
  return decode_image(bytes, path.string());
}

struct ImageSize {
  std::size_t width = 0;
  std::size_t height = 0;
};

// Reads dimensions from the file header without decoding the raster.
inline ImageSize probe_image_size(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::vector<std::uint8_t> head(4096);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  if (head.size() >= 24 && head[0] == 0x89 && head[1] == 'P') {
    auto be32 = [&](std::size_t at) {
      return (std::size_t{head[at]} << 24) | (std::size_t{head[at + 1]} << 16) |
             (std::size_t{head[at + 2]} << 8) | std::size_t{head[at + 3]};
    };
    return {be32(16), be32(20)};
  }
  if (head.size() >= 2 && head[0] == 'P' && head[1] == '6') {
    detail::PpmHeaderReader reader(head, path.string());
    const std::size_t w = reader.next_number();
    const std::size_t h = reader.next_number();
    return {w, h};
  }
  throw Error(ErrorCode::UnsupportedFormat, path.string());
}

inline void save_image(const ImageBuffer& img, const fs::path& path, ImageFormat format) {
  auto bytes = encode_image(img, format);
  write_file_atomic(path, bytes);
}

inline void save_image(const ImageBuffer& img, const fs::path& path) {
  save_image(img, path, format_from_extension(path));
}

}  // namespace extremeforge
