#pragma once

#include "boxrefine/records.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace boxrefine {

enum class DistanceKind { kIou, kGiou, kCenterNormalized };

struct CorrectionConfig {
  DistanceKind distance = DistanceKind::kIou;
  /// Norm for the center distance; ignored by the IoU-based measures.
  double center_norm = 60.0;
  /// Limit on the distance to the original target. Absent disables box
  /// correction.
  std::optional<double> distance_limit = 0.6;
  double temperature = 0.2;
  /// Minimum probability for mining. Absent disables mining.
  std::optional<double> mining_threshold;
  double mining_nms_iou = 0.5;
  double dedup_iou = 0.5;
  int max_iterations = 50;
  double convergence_eps = 1e-6;
  /// Side length of the fixed-size square variant. Forces the center distance
  /// normalized by this side.
  std::optional<double> fixed_size;

  /// Throws ConfigError.
  void validate() const;

  friend bool operator==(const CorrectionConfig&, const CorrectionConfig&) = default;
};

struct CorrectionReport {
  int iterations = 0;
  bool converged = true;
  /// Final |assigned predictions| per input target, in target order.
  std::vector<std::size_t> assignment_sizes;
  std::size_t corrected_count = 0;
  std::size_t mined_count = 0;
};

/// Distance under the configured measure.
double box_distance(const Box& a, const Box& b, const CorrectionConfig& cfg);

/// Iterative assignment/update refinement of noisy targets from (pre-NMS)
/// predictions, per class.
///
/// Each pass assigns every prediction to its nearest current corrected box
/// (ties to the lowest target index), but only if the prediction also lies
/// within `distance_limit` of that target's ORIGINAL box. Each target with a
/// non-empty assignment then becomes the softmax(logit / temperature)-weighted
/// average of its predictions, per coordinate (or per center coordinate in the
/// fixed-size variant, re-expanded to a fixed square). Stops when assignments
/// repeat, when no coordinate moves by convergence_eps or more, or at
/// max_iterations.
///
/// Output has the input's length, order and labels. Changed boxes are marked
/// Provenance::kCorrected.
std::pair<std::vector<Annotation>, CorrectionReport> correct_boxes(std::span<const Annotation> targets,
                                                                   std::span<const Detection> preds,
                                                                   const CorrectionConfig& cfg);

/// Appends confident predictions that no target covers:
/// prob >= threshold, then class-wise NMS, then dropping any prediction with
/// IoU > dedup_iou against a same-class target. Targets are always kept.
/// Throws ConfigError when mining_threshold is absent.
std::vector<Annotation> mine_labels(std::span<const Annotation> targets, std::span<const Detection> preds,
                                    const CorrectionConfig& cfg);

/// Box correction followed by mining against the corrected boxes. Either step
/// is skipped when its parameter (distance_limit / mining_threshold) is absent.
std::pair<std::vector<Annotation>, CorrectionReport> correct_targets(std::span<const Annotation> targets,
                                                                     std::span<const Detection> preds,
                                                                     const CorrectionConfig& cfg);

}  // namespace boxrefine
