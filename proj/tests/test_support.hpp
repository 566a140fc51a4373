#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "extremeforge/dataset.hpp"
#include "extremeforge/image.hpp"
#include "extremeforge/image_io.hpp"

namespace extremeforge::support {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("extremeforge-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline ImageBuffer random_image(std::mt19937_64& rng, std::size_t w, std::size_t h, double lo = 0.0,
                                double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  ImageBuffer img(w, h);
  for (std::size_t c = 0; c < 3; ++c)
    for (double& v : img.channel(c).values()) v = dist(rng);
  return img;
}

// Random image whose samples sit exactly on the u8 grid.
inline ImageBuffer random_u8_image(std::mt19937_64& rng, std::size_t w, std::size_t h) {
  std::uniform_int_distribution<int> dist(0, 255);
  ImageBuffer img(w, h);
  for (std::size_t c = 0; c < 3; ++c)
    for (double& v : img.channel(c).values()) v = dequantize(static_cast<unsigned char>(dist(rng)));
  return img;
}

// Smooth-ish image: gradient plus noise, so pyramid levels carry structure.
inline ImageBuffer structured_image(std::mt19937_64& rng, std::size_t w, std::size_t h, double level,
                                    double spread) {
  std::uniform_real_distribution<double> noise(-spread, spread);
  ImageBuffer img(w, h);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double ramp = spread * (static_cast<double>(x + y) / static_cast<double>(w + h) - 0.5);
        img.at(c, x, y) = std::clamp(level + ramp + noise(rng), 0.0, 1.0);
      }
  return img;
}

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Builds root/images/<id>.png (+ labels) from u8-quantized random images.
inline void make_dataset(const fs::path& root, std::mt19937_64& rng,
                         const std::vector<std::string>& ids, std::size_t w, std::size_t h,
                         bool with_labels = true) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "labels");
  std::uniform_real_distribution<double> u(0.2, 0.8);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    save_image(structured_image(rng, w, h, u(rng), 0.3), root / "images" / (ids[i] + ".png"));
    if (with_labels) {
      write_text(root / "labels" / (ids[i] + ".txt"),
                 std::to_string(i % 3) + " 0.5 0.5 0.25 0.5\n1 0.3 0.3 0.1 0.2\n");
    }
  }
}

inline void make_style_library(const fs::path& root, std::mt19937_64& rng,
                               const std::vector<std::pair<std::string, std::size_t>>& per_condition,
                               std::size_t w = 16, std::size_t h = 16) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (const auto& [condition, n] : per_condition) {
    fs::create_directories(root / condition);
    for (std::size_t i = 0; i < n; ++i) {
      save_image(structured_image(rng, w, h, u(rng), 0.2),
                 root / condition / ("s" + std::to_string(i) + ".png"));
    }
  }
}

inline std::uint64_t hash_bytes(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Relative path -> content hash for every regular file under root.
inline std::map<std::string, std::uint64_t> hash_tree(const fs::path& root) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out[fs::relative(e.path(), root).generic_string()] = hash_bytes(read_file_bytes(e.path()));
    }
  }
  return out;
}

}  // namespace extremeforge::support
