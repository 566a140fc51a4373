#pragma once

// Reference implementations used only by tests. They deliberately share no
// code with the library paths they check.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "extremeforge/types.hpp"

namespace extremeforge::oracle {

struct Fixture {
  std::vector<std::vector<BBox>> gts;
  std::vector<std::vector<Detection>> dets;
  std::size_t n_classes = 3;
};

inline double naive_iou(const BBox& a, const BBox& b) {
  const double ax0 = a.cx - a.w / 2, ax1 = a.cx + a.w / 2, ay0 = a.cy - a.h / 2, ay1 = a.cy + a.h / 2;
  const double bx0 = b.cx - b.w / 2, bx1 = b.cx + b.w / 2, by0 = b.cy - b.h / 2, by1 = b.cy + b.h / 2;
  const double ow = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double oh = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = ow * oh;
  if (inter == 0.0) return 0.0;
  return inter / ((ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter);
}

// Walks all detections of the class in one global order, matching greedily
// against unclaimed ground truths of the same image, then scores every
// recall level by scanning every prefix of the ranking.
inline std::optional<double> brute_force_ap(const Fixture& fx, int cls, double thr) {
  struct Item {
    double conf;
    std::size_t image;
    std::size_t index;
    const Detection* det;
  };
  std::vector<Item> items;
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < fx.gts.size(); ++i) {
    for (const auto& g : fx.gts[i]) n_gt += g.class_id == cls;
    for (std::size_t k = 0; k < fx.dets[i].size(); ++k) {
      if (fx.dets[i][k].box.class_id == cls) items.push_back({fx.dets[i][k].confidence, i, k, &fx.dets[i][k]});
    }
  }
  if (n_gt == 0) return items.empty() ? std::nullopt : std::optional<double>(0.0);
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return std::make_tuple(-a.conf, a.image, a.index) < std::make_tuple(-b.conf, b.image, b.index);
  });
  std::set<std::pair<std::size_t, std::size_t>> claimed;
  std::vector<int> hit;
  for (const auto& it : items) {
    double best = 0.0;
    long best_g = -1;
    for (std::size_t g = 0; g < fx.gts[it.image].size(); ++g) {
      const auto& gt = fx.gts[it.image][g];
      if (gt.class_id != cls || claimed.count({it.image, g})) continue;
      const double v = naive_iou(it.det->box, gt);
      if (v >= thr && (best_g < 0 || v > best)) {
        best = v;
        best_g = static_cast<long>(g);
      }
    }
    if (best_g >= 0) claimed.insert({it.image, static_cast<std::size_t>(best_g)});
    hit.push_back(best_g >= 0);
  }
  double total = 0.0;
  for (std::size_t r = 0; r <= 100; ++r) {
    double best = 0.0;
    for (std::size_t j = 1; j <= hit.size(); ++j) {
      std::size_t tp = 0;
      for (std::size_t q = 0; q < j; ++q) tp += static_cast<std::size_t>(hit[q]);
      if (tp * 100 >= r * n_gt) best = std::max(best, static_cast<double>(tp) / static_cast<double>(j));
    }
    total += best;
  }
  return total / 101.0;
}

inline std::optional<double> brute_force_ap5095(const Fixture& fx, int cls) {
  auto first = brute_force_ap(fx, cls, 0.5);
  if (!first) return std::nullopt;
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) sum += brute_force_ap(fx, cls, (50.0 + 5.0 * i) / 100.0).value_or(0.0);
  return sum / 10.0;
}

inline BBox random_box(std::mt19937_64& rng, int cls) {
  std::uniform_real_distribution<double> size(0.05, 0.4);
  const double w = size(rng), h = size(rng);
  std::uniform_real_distribution<double> cx(w / 2, 1 - w / 2), cy(h / 2, 1 - h / 2);
  return {cls, cx(rng), cy(rng), w, h};
}

// Up to 10 images and 20 boxes each. Confidences are coarse so that ties
// occur; detections are jittered copies of ground truth plus clutter.
inline Fixture random_fixture(std::mt19937_64& rng) {
  Fixture fx;
  std::uniform_int_distribution<int> n_images(1, 10), n_boxes(0, 20), cls(0, 2), coin(0, 3);
  std::uniform_int_distribution<int> conf_step(0, 20);
  std::normal_distribution<double> jitter(0.0, 0.03);
  const int images = n_images(rng);
  for (int i = 0; i < images; ++i) {
    std::vector<BBox> gts;
    const int ng = n_boxes(rng);
    for (int k = 0; k < ng; ++k) gts.push_back(random_box(rng, cls(rng)));
    std::vector<Detection> dets;
    for (const auto& g : gts) {
      if (coin(rng) == 0) continue;  // missed
      BBox b = g;
      b.cx = std::clamp(b.cx + jitter(rng), 0.0, 1.0);
      b.cy = std::clamp(b.cy + jitter(rng), 0.0, 1.0);
      b.w = std::max(0.01, b.w * (1.0 + jitter(rng) * 3));
      b.h = std::max(0.01, b.h * (1.0 + jitter(rng) * 3));
      if (coin(rng) == 0) b.class_id = cls(rng);
      dets.push_back({b, conf_step(rng) / 20.0});
      if (coin(rng) == 0) dets.push_back({b, conf_step(rng) / 20.0});  // duplicate
    }
    const int clutter = n_boxes(rng) / 4;
    for (int k = 0; k < clutter; ++k) dets.push_back({random_box(rng, cls(rng)), conf_step(rng) / 20.0});
    std::shuffle(dets.begin(), dets.end(), rng);
    if (dets.size() > 20) dets.resize(20);
    fx.gts.push_back(std::move(gts));
    fx.dets.push_back(std::move(dets));
  }
  return fx;
}

// Counts distinct outputs by listing every (content, style, alpha) triple
// and collapsing the alpha = 0 ones to a per-content key when deduplicating.
inline std::pair<std::size_t, std::size_t> enumerate_cardinality(std::size_t n_c, std::size_t n_s,
                                                                 const std::vector<double>& alphas,
                                                                 bool dedup) {
  std::size_t raw = 0;
  std::set<std::tuple<std::size_t, long, double>> unique;
  for (std::size_t c = 0; c < n_c; ++c)
    for (std::size_t s = 0; s < n_s; ++s)
      for (double a : alphas) {
        ++raw;
        if (dedup && a == 0.0) {
          unique.insert({c, -1, 0.0});
        } else {
          unique.insert({c, static_cast<long>(s), a});
        }
      }
  return {raw, unique.size()};
}

}  // namespace extremeforge::oracle
