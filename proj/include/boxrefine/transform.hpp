#pragma once

#include "boxrefine/box.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace boxrefine {

/// One geometric augmentation step. Composite transforms are ordered lists,
/// applied front to back.
template <typename Scalar>
struct GeoTransformT {
  enum class Kind { kHorizontalFlip, kVerticalFlip, kScale };

  Kind kind = Kind::kScale;
  // Flip: reference extent (image width or height). Scale: per-axis factors.
  Scalar a = Scalar(1);
  Scalar b = Scalar(1);

  static GeoTransformT horizontal_flip(Scalar image_width) {
    return {Kind::kHorizontalFlip, image_width, Scalar(0)};
  }
  static GeoTransformT vertical_flip(Scalar image_height) {
    return {Kind::kVerticalFlip, image_height, Scalar(0)};
  }
  static GeoTransformT scale(Scalar fx, Scalar fy) {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("scale factors must be positive");
    return {Kind::kScale, fx, fy};
  }

  GeoTransformT inverse() const {
    if (kind == Kind::kScale) return scale(Scalar(1) / a, Scalar(1) / b);
    return *this;
  }
};

using GeoTransform = GeoTransformT<double>;

template <typename Scalar>
BoxT<Scalar> apply_transform(const GeoTransformT<Scalar>& t, const BoxT<Scalar>& box) {
  using Kind = typename GeoTransformT<Scalar>::Kind;
  switch (t.kind) {
    case Kind::kHorizontalFlip:
      return BoxT<Scalar>(t.a - box.x2(), box.y1(), t.a - box.x1(), box.y2());
    case Kind::kVerticalFlip:
      return BoxT<Scalar>(box.x1(), t.a - box.y2(), box.x2(), t.a - box.y1());
    case Kind::kScale:
      return BoxT<Scalar>(box.x1() * t.a, box.y1() * t.b, box.x2() * t.a, box.y2() * t.b);
  }
  return box;
}

template <typename Scalar>
BoxT<Scalar> apply_transform(std::span<const GeoTransformT<Scalar>> chain, BoxT<Scalar> box) {
  for (const auto& t : chain) box = apply_transform(t, box);
  return box;
}

/// Inverse of a composite: inverted steps in reverse order.
template <typename Scalar>
std::vector<GeoTransformT<Scalar>> inverse(std::span<const GeoTransformT<Scalar>> chain) {
  std::vector<GeoTransformT<Scalar>> out;
  out.reserve(chain.size());
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) out.push_back(it->inverse());
  return out;
}

}  // namespace boxrefine
