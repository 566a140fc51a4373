#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "extremeforge/dataset.hpp"
#include "extremeforge/error.hpp"
#include "extremeforge/types.hpp"

namespace extremeforge {

inline constexpr std::size_t kRecallPoints = 101;

// IoU 0.50, 0.55, ..., 0.95
inline std::vector<double> coco_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(static_cast<double>(50 + 5 * i) / 100.0);
  return t;
}

inline double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (a.x2() - a.x1()) * (a.y2() - a.y1());
  const double area_b = (b.x2() - b.x1()) * (b.y2() - b.y1());
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

struct ScoredFlag {
  double confidence = 0.0;
  bool true_positive = false;
  friend bool operator==(const ScoredFlag&, const ScoredFlag&) = default;
};

// Detections of one class, in descending confidence, flagged TP/FP.
struct MatchResult {
  int class_id = 0;
  double iou_threshold = 0.5;
  std::vector<ScoredFlag> flags;
  std::size_t n_gt = 0;

  std::size_t true_positives() const {
    return static_cast<std::size_t>(
        std::count_if(flags.begin(), flags.end(), [](const auto& f) { return f.true_positive; }));
  }
};

// Greedy matching within one image: detections are visited by descending
// confidence (stable, so ties keep input order), each claiming the unmatched
// ground truth of its class with the highest IoU >= iou_thr.
inline MatchResult match_detections(std::span<const Detection> dets, std::span<const BBox> gts,
                                    double iou_thr, int class_id) {
  MatchResult result;
  result.class_id = class_id;
  result.iou_threshold = iou_thr;

  std::vector<const BBox*> class_gts;
  for (const auto& g : gts)
    if (g.class_id == class_id) class_gts.push_back(&g);
  result.n_gt = class_gts.size();

  std::vector<const Detection*> order;
  for (const auto& d : dets)
    if (d.box.class_id == class_id) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(),
                   [](const Detection* a, const Detection* b) { return a->confidence > b->confidence; });

  std::vector<bool> taken(class_gts.size(), false);
  for (const Detection* d : order) {
    double best = -1.0;
    std::size_t best_idx = class_gts.size();
    for (std::size_t g = 0; g < class_gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(d->box, *class_gts[g]);
      if (v >= iou_thr && v > best) {
        best = v;
        best_idx = g;
      }
    }
    const bool tp = best_idx < class_gts.size();
    if (tp) taken[best_idx] = true;
    result.flags.push_back({d->confidence, tp});
  }
  return result;
}

// Pools per-image results. Ties in confidence keep the order of `parts`,
// then the order within each part.
inline MatchResult merge_matches(std::span<const MatchResult> parts) {
  MatchResult merged;
  if (!parts.empty()) {
    merged.class_id = parts.front().class_id;
    merged.iou_threshold = parts.front().iou_threshold;
  }
  for (const auto& p : parts) {
    merged.flags.insert(merged.flags.end(), p.flags.begin(), p.flags.end());
    merged.n_gt += p.n_gt;
  }
  std::stable_sort(merged.flags.begin(), merged.flags.end(),
                   [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
  return merged;
}

// 101-point interpolated AP. nullopt when the class has neither ground truth
// nor detections; such classes are left out of mAP.
inline std::optional<double> average_precision(const MatchResult& match) {
  if (match.n_gt == 0) {
    if (match.flags.empty()) return std::nullopt;
    return 0.0;
  }
  const std::size_t n = match.flags.size();
  std::vector<double> precision(n);
  std::vector<std::size_t> tp_count(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (match.flags[i].true_positive) ++tp;
    tp_count[i] = tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // precision envelope from the right
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  // recall_i >= r/100  <=>  tp_i * 100 >= r * n_gt, evaluated in integers
  double sum = 0.0;
  std::size_t i = 0;
  for (std::size_t r = 0; r < kRecallPoints; ++r) {
    while (i < n && tp_count[i] * 100 < r * match.n_gt) ++i;
    if (i == n) break;
    sum += precision[i];
  }
  return sum / static_cast<double>(kRecallPoints);
}

struct ClassReport {
  std::string name;
  std::optional<double> ap50;
  std::optional<double> ap5095;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
};

struct EvalReport {
  std::vector<ClassReport> classes;
  double map50 = 0.0;
  double map5095 = 0.0;
  std::size_t n_images = 0;
  std::size_t n_gts = 0;
  std::size_t n_dets = 0;
  std::vector<double> thresholds;
};

inline constexpr const char* kProtocolNote =
    "COCO-style AP: 101-point interpolation, greedy highest-IoU matching, "
    "no crowd regions, no area ranges, unlimited detections per image";

namespace detail {

inline double mean_of_present(const std::vector<ClassReport>& classes,
                              std::optional<double> ClassReport::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : classes) {
    if (c.*field) {
      sum += *(c.*field);
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace detail

// Pools matches across all images per class and threshold. AP50 is taken at
// IoU 0.5; AP50:95 is the mean over `thresholds`.
inline EvalReport evaluate(const Dataset& dataset, const DetectionSet& detections,
                           std::vector<double> thresholds = coco_thresholds()) {
  if (thresholds.empty()) throw Error(ErrorCode::ParamOutOfRange, "no IoU thresholds");
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw Error(ErrorCode::ParamOutOfRange, "IoU threshold outside (0,1)");
  }
  for (const auto& [id, dets] : detections) {
    if (!dataset.find(id)) throw Error(ErrorCode::UnknownImageId, id);
  }

  static const std::vector<Detection> kNone;
  auto dets_for = [&](const AnnotatedImage& item) -> const std::vector<Detection>& {
    auto it = detections.find(item.image_id);
    return it == detections.end() ? kNone : it->second;
  };

  EvalReport report;
  report.thresholds = thresholds;
  report.n_images = dataset.items.size();
  for (const auto& item : dataset.items) {
    report.n_gts += item.boxes.size();
    report.n_dets += dets_for(item).size();
  }

  auto pooled_ap = [&](int cls, double thr) {
    std::vector<MatchResult> parts;
    parts.reserve(dataset.items.size());
    for (const auto& item : dataset.items) {
      parts.push_back(match_detections(dets_for(item), item.boxes, thr, cls));
    }
    return average_precision(merge_matches(parts));
  };

  for (std::size_t c = 0; c < dataset.class_names.size(); ++c) {
    const int cls = static_cast<int>(c);
    ClassReport cr;
    cr.name = dataset.class_names[c];
    for (const auto& item : dataset.items) {
      cr.n_gt += static_cast<std::size_t>(std::count_if(
          item.boxes.begin(), item.boxes.end(), [&](const BBox& b) { return b.class_id == cls; }));
      const auto& d = dets_for(item);
      cr.n_det += static_cast<std::size_t>(std::count_if(
          d.begin(), d.end(), [&](const Detection& x) { return x.box.class_id == cls; }));
    }
    cr.ap50 = pooled_ap(cls, 0.5);
    if (cr.ap50) {
      double sum = 0.0;
      for (double t : thresholds) sum += pooled_ap(cls, t).value_or(0.0);
      cr.ap5095 = sum / static_cast<double>(thresholds.size());
    }
    report.classes.push_back(std::move(cr));
  }
  report.map50 = detail::mean_of_present(report.classes, &ClassReport::ap50);
  report.map5095 = detail::mean_of_present(report.classes, &ClassReport::ap5095);
  return report;
}

// ---- JSON -----------------------------------------------------------------

inline nlohmann::json to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"name", c.name},
                       {"ap50", opt(c.ap50)},
                       {"ap5095", opt(c.ap5095)},
                       {"n_gt", c.n_gt},
                       {"n_det", c.n_det}});
  }
  return {{"protocol", kProtocolNote},
          {"classes", std::move(classes)},
          {"map50", r.map50},
          {"map5095", r.map5095},
          {"counts", {{"images", r.n_images}, {"gts", r.n_gts}, {"dets", r.n_dets}}},
          {"thresholds", r.thresholds}};
}

// Accepts reports written by to_json and hand-written ones (e.g. published
// numbers): missing mAPs are recomputed from the class entries.
inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    auto unit = [](const nlohmann::json& v, const char* what) -> std::optional<double> {
      if (v.is_null()) return std::nullopt;
      const double x = v.get<double>();
      if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::ParseError, std::string(what) + " outside [0,1]");
      return x;
    };
    for (const auto& c : j.at("classes")) {
      ClassReport cr;
      cr.name = c.at("name").get<std::string>();
      cr.ap50 = unit(c.value("ap50", nlohmann::json()), "ap50");
      cr.ap5095 = unit(c.value("ap5095", nlohmann::json()), "ap5095");
      cr.n_gt = c.value<std::size_t>("n_gt", 0);
      cr.n_det = c.value<std::size_t>("n_det", 0);
      r.classes.push_back(std::move(cr));
    }
    r.map50 = unit(j.value("map50", nlohmann::json()), "map50")
                  .value_or(detail::mean_of_present(r.classes, &ClassReport::ap50));
    r.map5095 = unit(j.value("map5095", nlohmann::json()), "map5095")
                    .value_or(detail::mean_of_present(r.classes, &ClassReport::ap5095));
    if (j.contains("counts")) {
      const auto& counts = j.at("counts");
      r.n_images = counts.value<std::size_t>("images", 0);
      r.n_gts = counts.value<std::size_t>("gts", 0);
      r.n_dets = counts.value<std::size_t>("dets", 0);
    }
    r.thresholds = j.value("thresholds", coco_thresholds());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report JSON: ") + e.what());
  }
  return r;
}

}  // namespace extremeforge
