#include "boxrefine/nms.hpp"

#include <algorithm>
#include <numeric>

namespace boxrefine {

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].prob > dets[b].prob; });

  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.label == d.label && iou(k.box, d.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace boxrefine
