#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "extremeforge/classical.hpp"
#include "extremeforge/dataset.hpp"
#include "extremeforge/error.hpp"
#include "extremeforge/image_io.hpp"
#include "extremeforge/parallel.hpp"
#include "extremeforge/style.hpp"

namespace extremeforge {

namespace fs = std::filesystem;

// ---- style library ------------------------------------------------------

struct StyleEntry {
  std::string style_id;  // "<condition>/<stem>"
  ConditionKind condition;
  fs::path path;

  friend bool operator==(const StyleEntry&, const StyleEntry&) = default;
};

struct StyleCatalog {
  fs::path root;
  std::vector<StyleEntry> entries;

  const StyleEntry* find(std::string_view id) const {
    for (const auto& e : entries)
      if (e.style_id == id) return &e;
    return nullptr;
  }
};

// One subdirectory per condition, named after ConditionKind (low_light,
// intense_light, sand_dust, fog, rain). Loose files at the top are ignored.
inline StyleCatalog scan_styles(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::IoError, "not a directory: " + root.string());
  StyleCatalog catalog{root, {}};
  std::vector<fs::path> dirs;
  for (fs::directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_directory()) dirs.push_back(it->path());
  }
  if (ec) throw Error(ErrorCode::IoError, "cannot list " + root.string() + ": " + ec.message());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const auto name = dir.filename().string();
    auto kind = parse_condition(name);
    if (!kind) throw Error(ErrorCode::UnknownConditionDir, dir.string());
    for (const auto& file : list_images(dir)) {
      catalog.entries.push_back({name + "/" + file.stem().string(), *kind, file});
    }
  }
  std::sort(catalog.entries.begin(), catalog.entries.end(),
            [](const auto& a, const auto& b) { return a.style_id < b.style_id; });
  for (std::size_t i = 1; i < catalog.entries.size(); ++i) {
    if (catalog.entries[i].style_id == catalog.entries[i - 1].style_id) {
      throw Error(ErrorCode::DuplicateImageId, catalog.entries[i].style_id);
    }
  }
  return catalog;
}

// ---- plan ---------------------------------------------------------------

struct StyleRef {
  std::string style_id;
  ConditionKind condition;
  friend bool operator==(const StyleRef&, const StyleRef&) = default;
};

struct TaJob {
  ConditionParams params;
  Seed seed;
  ConditionKind kind() const noexcept { return kind_of(params); }
  friend bool operator==(const TaJob&, const TaJob&) = default;
};

struct SynthesisPlan {
  std::optional<fs::path> content_root;
  std::optional<fs::path> style_root;
  std::vector<std::string> content_ids;
  std::vector<StyleRef> style_refs;
  std::vector<StrengthFactor> alphas;
  bool dedup_alpha_zero = true;
  std::vector<TaJob> ta_jobs;
  fs::path output_root;
  bool mix_in_originals = true;
  ImageFormat image_format = ImageFormat::png;

  friend bool operator==(const SynthesisPlan&, const SynthesisPlan&) = default;
};

struct PlanOptions {
  fs::path output_root;
  bool dedup_alpha_zero = true;
  bool mix_in_originals = true;
  std::vector<TaJob> ta_jobs;
  ImageFormat image_format = ImageFormat::png;
};

struct Cardinality {
  std::size_t n_c = 0;
  std::size_t n_s = 0;
  std::size_t n_alpha = 0;
  std::size_t n_e_raw = 0;
  std::size_t n_unique = 0;

  friend bool operator==(const Cardinality&, const Cardinality&) = default;
};

inline bool has_alpha_zero(const SynthesisPlan& plan) {
  return std::any_of(plan.alphas.begin(), plan.alphas.end(),
                     [](StrengthFactor a) { return a.value() == 0.0; });
}

// n_e_raw = N_c * N_s * N_alpha. With dedup on, the alpha = 0 image is the
// same for every style, so only one copy per content is kept.
inline Cardinality plan_cardinality(const SynthesisPlan& plan) {
  Cardinality c;
  c.n_c = plan.content_ids.size();
  c.n_s = plan.style_refs.size();
  c.n_alpha = plan.alphas.size();
  c.n_e_raw = c.n_c * c.n_s * c.n_alpha;
  c.n_unique = c.n_e_raw;
  if (plan.dedup_alpha_zero && has_alpha_zero(plan) && c.n_s > 0) {
    c.n_unique = c.n_c * c.n_s * (c.n_alpha - 1) + c.n_c;
  }
  return c;
}

inline void validate_plan(const SynthesisPlan& plan) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::PlanInvalid, what); };
  for (std::size_t i = 1; i < plan.alphas.size(); ++i) {
    if (!(plan.alphas[i - 1] < plan.alphas[i])) fail("alphas must be strictly increasing");
  }
  std::set<std::string> seen;
  for (const auto& id : plan.content_ids) {
    if (id.empty()) fail("empty content id");
    if (!seen.insert(id).second) fail("duplicate content id " + id);
  }
  seen.clear();
  for (const auto& ref : plan.style_refs) {
    if (!seen.insert(ref.style_id).second) fail("duplicate style id " + ref.style_id);
  }
  for (const auto& job : plan.ta_jobs) validate_params(job.params);
}

inline SynthesisPlan build_plan(const Dataset& contents, const StyleCatalog& styles,
                                std::vector<double> alphas, PlanOptions options) {
  if (contents.items.empty()) {
    throw Error(ErrorCode::EmptyDataset, "no content images under " + contents.root.string());
  }
  if (styles.entries.empty()) {
    throw Error(ErrorCode::EmptyDataset, "no style images under " + styles.root.string());
  }
  SynthesisPlan plan;
  plan.content_root = contents.root;
  plan.style_root = styles.root;
  for (const auto& item : contents.items) plan.content_ids.push_back(item.image_id);
  std::sort(plan.content_ids.begin(), plan.content_ids.end());
  for (const auto& e : styles.entries) plan.style_refs.push_back({e.style_id, e.condition});
  std::sort(plan.style_refs.begin(), plan.style_refs.end(),
            [](const auto& a, const auto& b) { return a.style_id < b.style_id; });
  for (double a : alphas) plan.alphas.emplace_back(a);
  plan.output_root = std::move(options.output_root);
  plan.dedup_alpha_zero = options.dedup_alpha_zero;
  plan.mix_in_originals = options.mix_in_originals;
  plan.ta_jobs = std::move(options.ta_jobs);
  plan.image_format = options.image_format;
  validate_plan(plan);
  return plan;
}

// ---- entries and manifest -------------------------------------------------

struct StyledSource {
  std::string style_id;
  ConditionKind condition;
  double alpha;
  friend bool operator==(const StyledSource&, const StyledSource&) = default;
};
struct TaSource {
  std::size_t job_index;
  ConditionKind kind;
  Seed seed;  // the job seed; the image seed is derive_seed(seed, content_id)
  friend bool operator==(const TaSource&, const TaSource&) = default;
};
struct OriginalSource {
  friend bool operator==(const OriginalSource&, const OriginalSource&) = default;
};

using EntrySource = std::variant<StyledSource, TaSource, OriginalSource>;

struct ManifestEntry {
  std::string output_id;
  std::string content_id;
  EntrySource source;
  bool has_label = false;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  Cardinality counts;
  std::size_t n_ta = 0;
  std::size_t n_originals = 0;
  bool partial = false;
  ImageFormat image_format = ImageFormat::png;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline std::string format_alpha(double alpha) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, alpha);
  return std::string(buf, ptr);
}

inline std::string output_id_for(const std::string& content_id, const EntrySource& source,
                                 bool deduplicated) {
  if (std::holds_alternative<OriginalSource>(source)) return content_id;
  if (const auto* ta = std::get_if<TaSource>(&source)) {
    return content_id + "__ta" + std::to_string(ta->job_index) + "-" +
           std::string(to_string(ta->kind)) + "-s" + std::to_string(ta->seed.value);
  }
  const auto& st = std::get<StyledSource>(source);
  if (deduplicated) return content_id + "__a" + format_alpha(st.alpha);
  std::string style = st.style_id;
  std::replace(style.begin(), style.end(), '/', '-');
  return content_id + "__" + style + "__a" + format_alpha(st.alpha);
}

// Every output the plan produces, sorted by output_id. has_label is left
// false; execution fills it in.
inline std::vector<ManifestEntry> enumerate_entries(const SynthesisPlan& plan) {
  validate_plan(plan);
  const bool dedup = plan.dedup_alpha_zero && has_alpha_zero(plan);
  std::vector<ManifestEntry> entries;
  for (const auto& content : plan.content_ids) {
    for (StrengthFactor alpha : plan.alphas) {
      const bool zero = alpha.value() == 0.0;
      for (std::size_t s = 0; s < plan.style_refs.size(); ++s) {
        if (dedup && zero && s > 0) break;
        const auto& ref = plan.style_refs[s];
        EntrySource src = StyledSource{ref.style_id, ref.condition, alpha.value()};
        entries.push_back({output_id_for(content, src, dedup && zero), content, src, false});
      }
    }
    for (std::size_t j = 0; j < plan.ta_jobs.size(); ++j) {
      EntrySource src = TaSource{j, plan.ta_jobs[j].kind(), plan.ta_jobs[j].seed};
      entries.push_back({output_id_for(content, src, false), content, src, false});
    }
    if (plan.mix_in_originals) {
      entries.push_back({content, content, OriginalSource{}, false});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.output_id < b.output_id; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].output_id == entries[i - 1].output_id) {
      throw Error(ErrorCode::PlanInvalid, "two outputs would share the id " + entries[i].output_id);
    }
  }
  return entries;
}

// ---- JSON -----------------------------------------------------------------

inline nlohmann::json to_json(const SynthesisPlan& plan) {
  nlohmann::json j;
  if (plan.content_root) j["content_root"] = plan.content_root->generic_string();
  if (plan.style_root) j["style_root"] = plan.style_root->generic_string();
  j["content_ids"] = plan.content_ids;
  j["style_refs"] = nlohmann::json::array();
  for (const auto& r : plan.style_refs) {
    j["style_refs"].push_back({{"style_id", r.style_id}, {"condition", to_string(r.condition)}});
  }
  j["alphas"] = nlohmann::json::array();
  for (auto a : plan.alphas) j["alphas"].push_back(a.value());
  j["dedup_alpha_zero"] = plan.dedup_alpha_zero;
  j["ta_jobs"] = nlohmann::json::array();
  for (const auto& job : plan.ta_jobs) {
    j["ta_jobs"].push_back(
        {{"kind", to_string(job.kind())}, {"params", to_json(job.params)}, {"seed", job.seed.value}});
  }
  j["output_root"] = plan.output_root.generic_string();
  j["mix_in_originals"] = plan.mix_in_originals;
  j["image_format"] = plan.image_format == ImageFormat::png ? "png" : "ppm";
  return j;
}

inline SynthesisPlan plan_from_json(const nlohmann::json& j) {
  SynthesisPlan plan;
  try {
    if (!j.is_object()) throw Error(ErrorCode::PlanInvalid, "plan must be a JSON object");
    if (j.contains("content_root")) plan.content_root = j.at("content_root").get<std::string>();
    if (j.contains("style_root")) plan.style_root = j.at("style_root").get<std::string>();
    plan.content_ids = j.at("content_ids").get<std::vector<std::string>>();
    for (const auto& r : j.at("style_refs")) {
      plan.style_refs.push_back({r.at("style_id").get<std::string>(),
                                 condition_from_string(r.at("condition").get<std::string>())});
    }
    for (const auto& a : j.at("alphas")) plan.alphas.emplace_back(a.get<double>());
    plan.dedup_alpha_zero = j.value("dedup_alpha_zero", true);
    if (j.contains("ta_jobs")) {
      for (const auto& t : j.at("ta_jobs")) {
        const auto kind = condition_from_string(t.at("kind").get<std::string>());
        plan.ta_jobs.push_back({params_from_json(kind, t.value("params", nlohmann::json::object())),
                                Seed{t.value<std::uint64_t>("seed", 0)}});
      }
    }
    plan.output_root = j.at("output_root").get<std::string>();
    plan.mix_in_originals = j.value("mix_in_originals", true);
    const auto format = j.value("image_format", std::string("png"));
    if (format == "png") {
      plan.image_format = ImageFormat::png;
    } else if (format == "ppm") {
      plan.image_format = ImageFormat::ppm;
    } else {
      throw Error(ErrorCode::PlanInvalid, "image_format must be png or ppm");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::PlanInvalid, std::string("plan JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::PlanInvalid) throw;
    throw Error(ErrorCode::PlanInvalid, e.what());
  }
  validate_plan(plan);
  return plan;
}

inline nlohmann::json to_json(const ManifestEntry& e, ImageFormat format) {
  nlohmann::json source;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, StyledSource>) {
          source = {{"type", "style"}, {"style_id", s.style_id},
                    {"condition", to_string(s.condition)}, {"alpha", s.alpha}};
        } else if constexpr (std::is_same_v<T, TaSource>) {
          source = {{"type", "ta"}, {"job", s.job_index}, {"kind", to_string(s.kind)},
                    {"seed", s.seed.value}};
        } else {
          source = {{"type", "original"}};
        }
      },
      e.source);
  nlohmann::json j = {{"output_id", e.output_id},
                      {"content_id", e.content_id},
                      {"source", std::move(source)},
                      {"image", "images/" + e.output_id + std::string(extension_for(format))}};
  j["label"] = e.has_label ? nlohmann::json("labels/" + e.output_id + ".txt") : nlohmann::json();
  return j;
}

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) entries.push_back(to_json(e, m.image_format));
  return {{"entries", std::move(entries)},
          {"counts",
           {{"n_c", m.counts.n_c},
            {"n_s", m.counts.n_s},
            {"n_alpha", m.counts.n_alpha},
            {"n_e_raw", m.counts.n_e_raw},
            {"n_unique", m.counts.n_unique},
            {"n_ta", m.n_ta},
            {"n_originals", m.n_originals}}},
          {"partial", m.partial}};
}

// ---- execution ------------------------------------------------------------

using ProgressSink = std::function<void(std::size_t done, std::size_t total)>;

struct ExecuteOptions {
  std::size_t threads = 1;
  ProgressSink progress;
};

namespace detail {

struct ContentWork {
  std::string content_id;
  fs::path image_path;
  fs::path label_path;
  std::vector<std::size_t> entry_indices;
};

inline void copy_label(const fs::path& src, const fs::path& dst, bool& has_label) {
  std::error_code ec;
  if (fs::is_regular_file(src, ec)) {
    write_file_atomic(dst, read_file_bytes(src));
    has_label = true;
  } else {
    // source has no label file: make sure a stale one from an earlier run is gone
    fs::remove(dst, ec);
    has_label = false;
  }
}

}  // namespace detail

// Renders every plan entry into output_root/images, copies label files
// verbatim into output_root/labels and writes output_root/manifest.json.
// On failure the manifest lists the finished entries with partial = true
// and the error is rethrown.
inline Manifest execute_plan(const SynthesisPlan& plan, const ExecuteOptions& options = {}) {
  if (!plan.content_root || !plan.style_root) {
    throw Error(ErrorCode::PlanInvalid, "plan has no content_root/style_root");
  }
  auto entries = enumerate_entries(plan);

  Manifest manifest;
  manifest.counts = plan_cardinality(plan);
  manifest.image_format = plan.image_format;
  manifest.n_ta = plan.content_ids.size() * plan.ta_jobs.size();
  manifest.n_originals = plan.mix_in_originals ? plan.content_ids.size() : 0;

  const fs::path images_out = plan.output_root / "images";
  const fs::path labels_out = plan.output_root / "labels";
  std::error_code ec;
  fs::create_directories(images_out, ec);
  if (!ec) fs::create_directories(labels_out, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + plan.output_root.string() + ": " + ec.message());

  // Resolve content files.
  std::map<std::string, fs::path, std::less<>> content_files;
  for (const auto& f : list_images(*plan.content_root / "images")) {
    if (!content_files.emplace(f.stem().string(), f).second) {
      throw Error(ErrorCode::DuplicateImageId, f.stem().string());
    }
  }
  std::map<std::string, std::size_t, std::less<>> work_index;
  std::vector<detail::ContentWork> work;
  for (const auto& id : plan.content_ids) {
    auto it = content_files.find(id);
    if (it == content_files.end()) {
      throw Error(ErrorCode::FileNotFound, "content image '" + id + "' under " +
                                               plan.content_root->string());
    }
    work_index[id] = work.size();
    work.push_back({id, it->second, *plan.content_root / "labels" / (id + ".txt"), {}});
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    work[work_index.at(entries[i].content_id)].entry_indices.push_back(i);
  }

  // Style vectors, one per referenced style.
  const auto catalog = scan_styles(*plan.style_root);
  std::vector<StyleVector> style_vectors(plan.style_refs.size());
  std::map<std::string, std::size_t, std::less<>> style_index;
  for (std::size_t s = 0; s < plan.style_refs.size(); ++s) {
    const auto& ref = plan.style_refs[s];
    const auto* entry = catalog.find(ref.style_id);
    if (!entry) throw Error(ErrorCode::FileNotFound, "style '" + ref.style_id + "'");
    if (entry->condition != ref.condition) {
      throw Error(ErrorCode::PlanInvalid, "style '" + ref.style_id + "' is not a " +
                                              std::string(to_string(ref.condition)) + " style");
    }
    style_index[ref.style_id] = s;
  }
  parallel_for(plan.style_refs.size(), options.threads, [&](std::size_t s) {
    const auto* entry = catalog.find(plan.style_refs[s].style_id);
    style_vectors[s] = extract_style(load_image(entry->path), entry->style_id);
  });

  std::vector<char> done(entries.size(), 0);
  std::mutex progress_mutex;
  std::size_t finished = 0;
  auto run = [&] {
    parallel_for(work.size(), options.threads, [&](std::size_t w) {
      const auto& job = work[w];
      const ImageBuffer content = load_image(job.image_path);
      std::optional<PreparedContent> prepared;
      for (std::size_t idx : job.entry_indices) {
        auto& entry = entries[idx];
        ImageBuffer out = std::visit(
            [&](const auto& src) -> ImageBuffer {
              using T = std::decay_t<decltype(src)>;
              if constexpr (std::is_same_v<T, StyledSource>) {
                if (!prepared) prepared.emplace(content);
                return prepared->render(style_vectors[style_index.at(src.style_id)],
                                        StrengthFactor(src.alpha));
              } else if constexpr (std::is_same_v<T, TaSource>) {
                const auto& ta = plan.ta_jobs[src.job_index];
                return simulate(content, ta.params, derive_seed(ta.seed, job.content_id));
              } else {
                return content;
              }
            },
            entry.source);
        save_image(out, images_out / (entry.output_id + std::string(extension_for(plan.image_format))),
                   plan.image_format);
        detail::copy_label(job.label_path, labels_out / (entry.output_id + ".txt"), entry.has_label);
        done[idx] = 1;
        if (options.progress) {
          std::lock_guard lock(progress_mutex);
          options.progress(++finished, entries.size());
        }
      }
    });
  };

  const auto manifest_path = plan.output_root / "manifest.json";
  try {
    run();
  } catch (...) {
    manifest.partial = true;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (done[i]) manifest.entries.push_back(entries[i]);
    try {
      write_file_atomic(manifest_path, to_json(manifest).dump(2) + "\n");
    } catch (...) {
    }
    throw;
  }
  manifest.entries = std::move(entries);
  write_file_atomic(manifest_path, to_json(manifest).dump(2) + "\n");
  return manifest;
}

}  // namespace extremeforge
