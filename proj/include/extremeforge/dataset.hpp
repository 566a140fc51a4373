#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "extremeforge/error.hpp"
#include "extremeforge/image_io.hpp"
#include "extremeforge/types.hpp"

namespace extremeforge {

namespace fs = std::filesystem;

inline const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names = {"worker", "vest", "helmet"};
  return names;
}

struct AnnotatedImage {
  std::string image_id;
  fs::path image_path;
  std::optional<fs::path> label_path;
  std::vector<BBox> boxes;

  ImageBuffer load() const { return load_image(image_path); }

  friend bool operator==(const AnnotatedImage&, const AnnotatedImage&) = default;
};

struct Dataset {
  fs::path root;
  std::vector<AnnotatedImage> items;
  std::vector<std::string> class_names;

  const AnnotatedImage* find(std::string_view id) const {
    auto it = std::lower_bound(items.begin(), items.end(), id,
                               [](const AnnotatedImage& a, std::string_view v) { return a.image_id < v; });
    return it != items.end() && it->image_id == id ? &*it : nullptr;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

class LineParser {
 public:
  LineParser(const fs::path& path, std::size_t line_no) : path_(path), line_no_(line_no) {}

  [[noreturn]] void fail(ErrorCode code, const std::string& what) const {
    throw Error(code, path_.string() + ":" + std::to_string(line_no_) + ": " + what);
  }

  double number(std::string_view token) const {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (!token.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
      fail(ErrorCode::ParseError, "bad number '" + std::string(token) + "'");
    }
    return value;
  }

  int class_id(std::string_view token, std::size_t n_classes) const {
    int value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || value < 0) {
      fail(ErrorCode::ParseError, "bad class id '" + std::string(token) + "'");
    }
    if (static_cast<std::size_t>(value) >= n_classes) {
      fail(ErrorCode::ClassOutOfRange,
           "class " + std::to_string(value) + " >= " + std::to_string(n_classes));
    }
    return value;
  }

  // Boxes whose corners leave the unit square are clipped to it; in-range
  // boxes are kept verbatim.
  BBox box(int cls, std::span<const std::string_view> coords) const {
    BBox b{cls, number(coords[0]), number(coords[1]), number(coords[2]), number(coords[3])};
    if (b.w <= 0.0 || b.h <= 0.0) fail(ErrorCode::ParseError, "box width and height must be > 0");
    if (b.x1() < 0.0 || b.y1() < 0.0 || b.x2() > 1.0 || b.y2() > 1.0) {
      b = BBox::from_corners(cls, std::clamp(b.x1(), 0.0, 1.0), std::clamp(b.y1(), 0.0, 1.0),
                             std::clamp(b.x2(), 0.0, 1.0), std::clamp(b.y2(), 0.0, 1.0));
      if (b.w <= 0.0 || b.h <= 0.0) fail(ErrorCode::ParseError, "box lies outside the image");
    }
    return b;
  }

 private:
  const fs::path& path_;
  std::size_t line_no_;
};

template <typename Fn>
void for_each_record(const fs::path& path, std::size_t n_fields, Fn&& fn) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return;
  auto bytes = read_file_bytes(path);
  std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    LineParser parser(path, line_no);
    if (tokens.size() != n_fields) {
      parser.fail(ErrorCode::ParseError, "expected " + std::to_string(n_fields) + " fields, got " +
                                             std::to_string(tokens.size()));
    }
    fn(parser, std::span<const std::string_view>(tokens));
  }
}

inline void append_number(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace detail

// "class cx cy w h" per line. A missing file means the image has no objects.
inline std::vector<BBox> load_annotations(const fs::path& path, std::size_t n_classes) {
  std::vector<BBox> boxes;
  detail::for_each_record(path, 5, [&](const detail::LineParser& p, auto tokens) {
    int cls = p.class_id(tokens[0], n_classes);
    boxes.push_back(p.box(cls, tokens.subspan(1)));
  });
  return boxes;
}

// "class conf cx cy w h" per line.
inline std::vector<Detection> load_detections(const fs::path& path, std::size_t n_classes) {
  std::vector<Detection> dets;
  detail::for_each_record(path, 6, [&](const detail::LineParser& p, auto tokens) {
    int cls = p.class_id(tokens[0], n_classes);
    double conf = p.number(tokens[1]);
    if (conf < 0.0 || conf > 1.0) p.fail(ErrorCode::ConfidenceOutOfRange, std::string(tokens[1]));
    dets.push_back({p.box(cls, tokens.subspan(2)), conf});
  });
  return dets;
}

// Shortest round-trip decimal form, one record per line.
inline std::string format_annotations(std::span<const BBox> boxes) {
  std::string out;
  for (const auto& b : boxes) {
    out += std::to_string(b.class_id);
    for (double v : {b.cx, b.cy, b.w, b.h}) {
      out += ' ';
      detail::append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

inline std::string format_detections(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    out += std::to_string(d.box.class_id);
    for (double v : {d.confidence, d.box.cx, d.box.cy, d.box.w, d.box.h}) {
      out += ' ';
      detail::append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

inline bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".png" || ext == ".ppm";
}

// Lists image files directly inside dir, sorted by path.
inline std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file() && is_image_file(it->path())) files.push_back(it->path());
  }
  if (ec) throw Error(ErrorCode::IoError, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

// Layout: root/images/*.{png,ppm} with optional root/labels/<stem>.txt.
inline Dataset dataset_scan(const fs::path& root, std::vector<std::string> class_names) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::IoError, "not a directory: " + root.string());
  const auto images_dir = root / "images";
  if (!fs::is_directory(images_dir, ec)) {
    throw Error(ErrorCode::IoError, "missing images/ directory under " + root.string());
  }
  Dataset ds{root, {}, std::move(class_names)};
  for (const auto& file : list_images(images_dir)) {
    AnnotatedImage item;
    item.image_id = file.stem().string();
    item.image_path = file;
    auto label = root / "labels" / (item.image_id + ".txt");
    if (fs::is_regular_file(label, ec)) {
      item.boxes = load_annotations(label, ds.class_names.size());
      item.label_path = label;
    }
    ds.items.push_back(std::move(item));
  }
  std::sort(ds.items.begin(), ds.items.end(),
            [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  for (std::size_t i = 1; i < ds.items.size(); ++i) {
    if (ds.items[i].image_id == ds.items[i - 1].image_id) {
      throw Error(ErrorCode::DuplicateImageId, ds.items[i].image_id + " in " + root.string());
    }
  }
  return ds;
}

using DetectionSet = std::map<std::string, std::vector<Detection>, std::less<>>;

// Reads every <stem>.txt in dir. Ids are checked against a dataset later, in
// evaluate().
inline DetectionSet load_detection_dir(const fs::path& dir, std::size_t n_classes) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file() && it->path().extension() == ".txt") files.push_back(it->path());
  }
  if (ec) throw Error(ErrorCode::IoError, "cannot list " + dir.string() + ": " + ec.message());
  DetectionSet set;
  for (const auto& f : files) set[f.stem().string()] = load_detections(f, n_classes);
  return set;
}

}  // namespace extremeforge
