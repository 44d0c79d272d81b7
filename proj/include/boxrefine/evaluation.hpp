#pragma once

#include "boxrefine/records.hpp"

#include <cstddef>
#include <map>
#include <string>

namespace boxrefine {

struct ClassCounts {
  std::size_t gt = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct EvalResult {
  std::map<int, double> ap;  // classes with at least one ground-truth box
  std::map<int, ClassCounts> counts;
  double map = 0.0;
};

struct QualityStats {
  double gt_to_annotations = 0.0;
  double annotations_to_gt = 0.0;
  std::size_t gt_count = 0;
  std::size_t annotation_count = 0;
  // False when the corresponding average is over an empty set (reported as 0).
  bool gt_to_annotations_defined = false;
  bool annotations_to_gt_defined = false;
};

struct ErrorBreakdown {
  std::size_t true_positive = 0;
  std::size_t localization = 0;
  std::size_t duplicate = 0;
  std::size_t background = 0;
  std::size_t classification = 0;
  /// Wrong class and IoU in (0.1, 0.5] against every other-class box.
  std::size_t both = 0;
  std::size_t missed = 0;
  std::size_t total_gt = 0;
};

/// AP at IoU 0.5 per class with all-point interpolated precision.
///
/// Predictions are the detections of `predictions` images, matched by image
/// id against `ground_truth` annotations. Per class, predictions are taken in
/// descending probability (ties: image order, then list order); each matches
/// the unmatched ground-truth box of highest IoU >= 0.5 (ties: lowest index).
/// mAP averages classes that have ground truth. Throws ValidationError when a
/// prediction image id is absent from the ground truth.
EvalResult evaluate_ap50(const Dataset& ground_truth, const Dataset& predictions);

/// Mean best-match IoU in both directions, ignoring class labels. Boxes in
/// images missing from the other side match nothing.
QualityStats quality_stats(const Dataset& ground_truth, const Dataset& annotations);

/// Simplified error attribution. Predictions below `score_floor` are ignored;
/// the rest are processed in descending score and classified as
/// true positive (same class, IoU > 0.5, GT unmatched), duplicate (same class,
/// IoU > 0.5, GT already matched), classification (other class, IoU > 0.5),
/// localization (same class, IoU in (0.1, 0.5]), both, or background
/// (IoU <= 0.1 with every GT box).
ErrorBreakdown error_breakdown(const Dataset& ground_truth, const Dataset& predictions, double score_floor);

/// All-point interpolated area under a precision/recall sequence.
double average_precision(const std::vector<double>& recall, const std::vector<double>& precision);

}  // namespace boxrefine
