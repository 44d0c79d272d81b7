#pragma once

#include "boxrefine/records.hpp"

#include <span>
#include <vector>

namespace boxrefine {

/// Class-wise greedy non-maximum suppression on probability scores.
///
/// A detection survives iff its IoU with every already kept detection of the
/// same class is <= `iou_threshold`. Equal scores keep input order. Output is
/// sorted by descending score.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold);

}  // namespace boxrefine
