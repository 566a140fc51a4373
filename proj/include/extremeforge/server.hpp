#pragma once

#include <charconv>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "extremeforge/classical.hpp"
#include "extremeforge/dataset.hpp"
#include "extremeforge/eval.hpp"
#include "extremeforge/image_io.hpp"
#include "extremeforge/planner.hpp"
#include "extremeforge/style.hpp"

namespace extremeforge {

namespace fs = std::filesystem;

inline constexpr int kDefaultPort = 8787;

// Root layout served by the preview server:
//   <root>/images, <root>/labels    content dataset
//   <root>/styles/<condition>/...   style library (optional)
//   <root>/reports/<label>.json     evaluation reports (optional)
//   <root>/plans/                   where POST /api/plan saves plans
struct ServerConfig {
  fs::path root;
  std::vector<std::string> class_names = default_class_names();
  std::size_t cache_capacity = 128;
};

// Renders a stylized image to PNG bytes; shared by the CLI and the server so
// both produce identical files.
inline std::vector<std::uint8_t> render_stylized_png(const ImageBuffer& content,
                                                     const StyleVector& style, StrengthFactor alpha) {
  return encode_png(apply_style(content, style, alpha));
}

inline std::vector<std::uint8_t> render_simulated_png(const ImageBuffer& content,
                                                      const ConditionParams& params, Seed seed) {
  return encode_png(simulate(content, params, seed));
}

class PreviewServer {
 public:
  explicit PreviewServer(ServerConfig config) : config_(std::move(config)) {
    contents_ = dataset_scan(config_.root, config_.class_names);
    for (const auto& item : contents_.items) sizes_.push_back(probe_image_size(item.image_path));
    std::error_code ec;
    if (fs::is_directory(config_.root / "styles", ec)) styles_ = scan_styles(config_.root / "styles");
    routes();
  }

  PreviewServer(const PreviewServer&) = delete;
  PreviewServer& operator=(const PreviewServer&) = delete;

  // Returns the bound port (useful with port 0), or -1 on failure.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  bool running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  static void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
  }

  static void send_json(httplib::Response& res, const nlohmann::json& j) {
    res.set_content(j.dump(), "application/json");
  }

  static void send_png(httplib::Response& res, const std::vector<std::uint8_t>& bytes) {
    res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "image/png");
  }

  static int status_for(ErrorCode code) {
    switch (code) {
      case ErrorCode::FileNotFound:
      case ErrorCode::UnknownImageId:
      case ErrorCode::UnknownLabel: return 404;
      case ErrorCode::IoError: return 500;
      default: return 400;
    }
  }

  template <typename Fn>
  static httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  static std::string param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) {
      throw Error(ErrorCode::ParseError, std::string("missing query parameter '") + name + "'");
    }
    return req.get_param_value(name);
  }

  fs::path image_path_for(const std::string& id) const {
    if (const auto* item = contents_.find(id)) return item->image_path;
    if (const auto* style = styles_.find(id)) return style->path;
    throw Error(ErrorCode::UnknownImageId, id);
  }

  const AnnotatedImage& content(const std::string& id) const {
    const auto* item = contents_.find(id);
    if (!item) throw Error(ErrorCode::UnknownImageId, "content '" + id + "'");
    return *item;
  }

  StyleVector style_vector(const std::string& id) {
    {
      std::lock_guard lock(mutex_);
      if (auto it = style_cache_.find(id); it != style_cache_.end()) return it->second;
    }
    const auto* entry = styles_.find(id);
    if (!entry) throw Error(ErrorCode::UnknownImageId, "style '" + id + "'");
    auto vec = extract_style(load_image(entry->path), id);
    std::lock_guard lock(mutex_);
    style_cache_.emplace(id, vec);
    return vec;
  }

  std::optional<std::shared_ptr<const std::vector<std::uint8_t>>> cached(const std::string& key) {
    std::lock_guard lock(mutex_);
    auto it = png_cache_.find(key);
    if (it == png_cache_.end()) return std::nullopt;
    return it->second;
  }

  void remember(const std::string& key, std::shared_ptr<const std::vector<std::uint8_t>> png) {
    std::lock_guard lock(mutex_);
    if (png_cache_.emplace(key, std::move(png)).second) {
      cache_order_.push_back(key);
      while (cache_order_.size() > config_.cache_capacity) {
        png_cache_.erase(cache_order_.front());
        cache_order_.pop_front();
      }
    }
  }

  static double parse_double(const std::string& text, const char* what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(ErrorCode::ParseError, std::string("bad ") + what + " '" + text + "'");
    }
    return v;
  }

  static std::uint64_t parse_u64(const std::string& text, const char* what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(ErrorCode::ParseError, std::string("bad ") + what + " '" + text + "'");
    }
    return v;
  }

  void routes() {
    server_.Get("/api/contents", guarded([this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json out = nlohmann::json::array();
      for (std::size_t i = 0; i < contents_.items.size(); ++i) {
        const auto& item = contents_.items[i];
        out.push_back({{"id", item.image_id},
                       {"w", sizes_[i].width},
                       {"h", sizes_[i].height},
                       {"n_boxes", item.boxes.size()}});
      }
      send_json(res, out);
    }));

    server_.Get("/api/styles", guarded([this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& e : styles_.entries) {
        out.push_back({{"id", e.style_id}, {"condition", to_string(e.condition)}});
      }
      send_json(res, out);
    }));

    server_.Get(R"(/api/image/(.+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_png(res, encode_png(load_image(image_path_for(req.matches[1]))));
    }));

    server_.Get("/api/stylize", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto content_id = param(req, "content");
      const auto style_id = param(req, "style");
      const StrengthFactor alpha(parse_double(param(req, "alpha"), "alpha"));
      const auto key = "stylize|" + content_id + "|" + style_id + "|" + format_alpha(alpha.value());
      if (auto hit = cached(key)) {
        send_png(res, **hit);
        return;
      }
      const auto& item = content(content_id);
      const auto style = style_vector(style_id);
      auto png = std::make_shared<const std::vector<std::uint8_t>>(
          render_stylized_png(item.load(), style, alpha));
      remember(key, png);
      send_png(res, *png);
    }));

    server_.Get("/api/simulate", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto content_id = param(req, "content");
      const auto kind = condition_from_string(param(req, "kind"));
      const Seed seed{req.has_param("seed") ? parse_u64(req.get_param_value("seed"), "seed") : 0};
      const auto key = "simulate|" + content_id + "|" + std::string(to_string(kind)) + "|" +
                       std::to_string(seed.value);
      if (auto hit = cached(key)) {
        send_png(res, **hit);
        return;
      }
      const auto& item = content(content_id);
      auto png = std::make_shared<const std::vector<std::uint8_t>>(
          render_simulated_png(item.load(), default_params(kind), seed));
      remember(key, png);
      send_png(res, *png);
    }));

    server_.Post("/api/plan", guarded([this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::PlanInvalid, std::string("body is not JSON: ") + e.what());
      }
      const auto plan = plan_from_json(body);
      const auto counts = plan_cardinality(plan);
      const auto text = body.dump(2) + "\n";
      char name[64];
      std::snprintf(name, sizeof name, "plan-%016llx.json",
                    static_cast<unsigned long long>(fnv1a64(text)));
      const auto dir = config_.root / "plans";
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
      write_file_atomic(dir / name, text);
      send_json(res, {{"path", (dir / name).generic_string()},
                      {"n_e_raw", counts.n_e_raw},
                      {"n_unique", counts.n_unique}});
    }));

    server_.Get(R"(/api/report/([A-Za-z0-9_.\-]+))",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string label = req.matches[1];
                  const auto path = config_.root / "reports" / (label + ".json");
                  std::error_code ec;
                  if (label.find("..") != std::string::npos || !fs::is_regular_file(path, ec)) {
                    throw Error(ErrorCode::UnknownLabel, label);
                  }
                  const auto bytes = read_file_bytes(path);
                  nlohmann::json j;
                  try {
                    j = nlohmann::json::parse(bytes.begin(), bytes.end());
                  } catch (const nlohmann::json::exception& e) {
                    throw Error(ErrorCode::ParseError, e.what());
                  }
                  send_json(res, to_json(report_from_json(j)));
                }));
  }

  ServerConfig config_;
  Dataset contents_;
  std::vector<ImageSize> sizes_;
  StyleCatalog styles_;
  httplib::Server server_;

  std::mutex mutex_;
  std::map<std::string, StyleVector> style_cache_;
  std::map<std::string, std::shared_ptr<const std::vector<std::uint8_t>>> png_cache_;
  std::deque<std::string> cache_order_;
};

}  // namespace extremeforge
