// Seeded synthetic instances shared by unit and acceptance tests.
#pragma once

#include "boxrefine/correction.hpp"
#include "boxrefine/noise.hpp"
#include "boxrefine/rng.hpp"
#include "oracles.hpp"

#include <vector>

namespace fixtures {

using namespace boxrefine;

struct RecoveryImage {
  std::vector<Annotation> truth;
  std::vector<Annotation> noisy;
  std::vector<Detection> preds;
};

/// Disjoint objects in a 512x512 image; targets displaced at N_b = 40%;
/// three predictions per object displaced at N_b = 5% with logits increasing
/// in their IoU to the object.
inline RecoveryImage recovery_image(std::uint64_t seed) {
  Rng rng(seed);
  RecoveryImage out;
  const int count = 3 + static_cast<int>(rng.uniform_index(4));
  for (int attempt = 0; attempt < 1000 && static_cast<int>(out.truth.size()) < count; ++attempt) {
    const double w = rng.uniform(40, 120);
    const double h = rng.uniform(40, 120);
    const double x = rng.uniform(0, 512 - w);
    const double y = rng.uniform(0, 512 - h);
    const Box b(x, y, x + w, y + h);
    bool clear = true;
    for (const auto& t : out.truth) {
      // Keep a margin so a 40% displaced box cannot reach a neighbor.
      const Box grown(t.box.x1() - 0.5 * t.box.width(), t.box.y1() - 0.5 * t.box.height(),
                      t.box.x2() + 0.5 * t.box.width(), t.box.y2() + 0.5 * t.box.height());
      if (intersection_area(grown, b) > 0) clear = false;
    }
    if (clear) out.truth.push_back({b, 1, Provenance::kOriginal});
  }
  out.noisy = displace_boxes(out.truth, 0.4, 512, 512, rng);
  for (const auto& t : out.truth) {
    for (int k = 0; k < 3; ++k) {
      const Annotation one[] = {t};
      const Box p = displace_boxes(one, 0.05, 512, 512, rng)[0].box;
      const double q = oracle::iou(p, t.box);
      out.preds.push_back(Detection::from_logit(p, 1, 10.0 * (q - 0.5)));
    }
  }
  return out;
}

inline double mean_iou(const std::vector<Annotation>& boxes, const std::vector<Annotation>& truth) {
  double sum = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) sum += oracle::iou(boxes[i].box, truth[i].box);
  return boxes.empty() ? 0.0 : sum / static_cast<double>(boxes.size());
}

struct SeparatedInstance {
  std::vector<Annotation> targets;
  std::vector<Detection> preds;
};

/// Targets on a coarse grid (pairwise IoU distance 1 > 2d for d < 0.5), each
/// with 1-5 predictions within d of it and disjoint from every other target.
inline SeparatedInstance separated_instance(std::uint64_t seed, double limit) {
  Rng rng(seed);
  SeparatedInstance out;
  const int n = 1 + static_cast<int>(rng.uniform_index(6));
  for (int t = 0; t < n; ++t) {
    const double cx = 100.0 + 200.0 * t;
    const double cy = 100.0 + 200.0 * static_cast<double>(rng.uniform_index(3));
    const double w = rng.uniform(30, 80);
    const double h = rng.uniform(30, 80);
    const Box target = Box::from_center({cx, cy}, w, h);
    out.targets.push_back({target, 1, Provenance::kOriginal});
    const int k = 1 + static_cast<int>(rng.uniform_index(5));
    for (int j = 0; j < k;) {
      const Box p(target.x1() + rng.uniform(-10, 10), target.y1() + rng.uniform(-10, 10),
                  target.x2() + rng.uniform(-10, 10), target.y2() + rng.uniform(-10, 10));
      if (1.0 - oracle::iou(target, p) > limit) continue;
      out.preds.push_back(Detection::from_logit(p, 1, rng.uniform(-3, 3)));
      ++j;
    }
  }
  return out;
}

}  // namespace fixtures
