#pragma once

#include "boxrefine/box.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace boxrefine {

enum class Provenance { kOriginal, kCorrected, kMined };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

double sigmoid(double logit);
/// ln(p / (1 - p)) with p clamped to [1e-6, 1 - 1e-6].
double logit_from_prob(double prob);

/// A predicted box. Algorithm weighting uses `logit`; thresholds use `prob`.
struct Detection {
  Box box;
  int label = 1;
  double prob = 0.0;
  double logit = 0.0;

  static Detection from_logit(const Box& box, int label, double logit);
  static Detection from_prob(const Box& box, int label, double prob);

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Annotation {
  Box box;
  int label = 1;
  Provenance provenance = Provenance::kOriginal;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// A point label before materialization into a fixed-size box.
struct PointAnnotation {
  std::string image_id;
  double x = 0.0;
  double y = 0.0;
  int label = 1;

  friend bool operator==(const PointAnnotation&, const PointAnnotation&) = default;
};

/// Box sets for one image. Pixel content is never stored. A width or height
/// of 0 means the extent is unknown.
struct ImageRecord {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<Annotation> annotations;
  std::optional<std::vector<Detection>> detections;
  std::vector<PointAnnotation> points;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<ImageRecord> images;

  int class_count() const { return static_cast<int>(class_names.size()); }
  const ImageRecord* find(std::string_view image_id) const;
  ImageRecord* find(std::string_view image_id);

  std::size_t annotation_count() const;

  /// Throws ValidationError on duplicate image ids.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Square boxes of side `side` centered on each point. Boxes are clipped to
/// the image extents when `images` knows them. Throws ValidationError listing
/// point image ids missing from `images`.
std::vector<Annotation> points_to_boxes(std::span<const PointAnnotation> points, double side,
                                        const Dataset& images);
std::vector<Annotation> points_to_boxes(std::span<const PointAnnotation> points, double side);

/// Moves each image's points into its annotation list as fixed-size boxes.
void materialize_points(Dataset& dataset, double side);

}  // namespace boxrefine
