#pragma once

#include "boxrefine/records.hpp"

#include <span>
#include <string>

namespace boxrefine {

enum class Layer : unsigned {
  kOriginal = 1u << 0,
  kCorrected = 1u << 1,
  kMined = 1u << 2,
  kDetections = 1u << 3,
  kGroundTruth = 1u << 4,
};

/// Bitmask of Layer values.
class LayerSet {
 public:
  constexpr LayerSet() = default;
  constexpr LayerSet(std::initializer_list<Layer> layers) {
    for (Layer l : layers) bits_ |= static_cast<unsigned>(l);
  }
  static constexpr LayerSet all() {
    return {Layer::kOriginal, Layer::kCorrected, Layer::kMined, Layer::kDetections, Layer::kGroundTruth};
  }
  constexpr bool contains(Layer l) const { return (bits_ & static_cast<unsigned>(l)) != 0; }
  constexpr void insert(Layer l) { bits_ |= static_cast<unsigned>(l); }

 private:
  unsigned bits_ = 0;
};

/// Parses a comma-separated list such as "original,corrected,detections".
LayerSet parse_layers(const std::string& list);

/// SVG 1.1 document with one <rect> per box in the requested layers. The
/// viewBox is the image extent; the frame is drawn as a path so rect counts
/// equal box counts.
std::string render_svg(const ImageRecord& record, LayerSet layers,
                       std::span<const Annotation> ground_truth = {});

}  // namespace boxrefine
