#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace boxrefine {

/// Axis-aligned box in continuous pixel coordinates.
///
/// Stored as a 4-vector (x1, y1, x2, y2). Every constructor canonicalizes, so
/// x1 <= x2 and y1 <= y2 hold for every instance. Area is (x2-x1)*(y2-y1) with
/// no "+1" pixel convention.
template <typename Scalar>
class BoxT {
 public:
  using Coords = Eigen::Matrix<Scalar, 4, 1>;
  using Point = Eigen::Matrix<Scalar, 2, 1>;

  BoxT() : coords_(Coords::Zero()) {}

  BoxT(Scalar x1, Scalar y1, Scalar x2, Scalar y2) : coords_(x1, y1, x2, y2) {
    canonicalize();
  }

  explicit BoxT(const Coords& coords) : coords_(coords) { canonicalize(); }

  static BoxT from_center(const Point& center, Scalar width, Scalar height) {
    return BoxT(center.x() - width / 2, center.y() - height / 2,
                center.x() + width / 2, center.y() + height / 2);
  }

  /// COCO-style (x, y, w, h).
  static BoxT from_xywh(Scalar x, Scalar y, Scalar w, Scalar h) {
    return BoxT(x, y, x + w, y + h);
  }

  Scalar x1() const { return coords_[0]; }
  Scalar y1() const { return coords_[1]; }
  Scalar x2() const { return coords_[2]; }
  Scalar y2() const { return coords_[3]; }

  const Coords& coords() const { return coords_; }

  Scalar width() const { return x2() - x1(); }
  Scalar height() const { return y2() - y1(); }
  Scalar area() const { return width() * height(); }
  Point center() const { return Point((x1() + x2()) / 2, (y1() + y2()) / 2); }

  /// Clips to [0, width] x [0, height]. Non-positive extents disable clipping
  /// along that axis (image size unknown).
  BoxT clipped(Scalar image_width, Scalar image_height) const {
    Coords c = coords_;
    if (image_width > 0) {
      c[0] = std::clamp(c[0], Scalar(0), image_width);
      c[2] = std::clamp(c[2], Scalar(0), image_width);
    }
    if (image_height > 0) {
      c[1] = std::clamp(c[1], Scalar(0), image_height);
      c[3] = std::clamp(c[3], Scalar(0), image_height);
    }
    return BoxT(c);
  }

  template <typename Other>
  BoxT<Other> cast() const {
    return BoxT<Other>(coords_.template cast<Other>());
  }

  friend bool operator==(const BoxT& a, const BoxT& b) { return a.coords_ == b.coords_; }
  friend bool operator!=(const BoxT& a, const BoxT& b) { return !(a == b); }

 private:
  void canonicalize() {
    if (coords_[0] > coords_[2]) std::swap(coords_[0], coords_[2]);
    if (coords_[1] > coords_[3]) std::swap(coords_[1], coords_[3]);
  }

  Coords coords_;
};

using Box = BoxT<double>;

template <typename Scalar>
Scalar intersection_area(const BoxT<Scalar>& a, const BoxT<Scalar>& b) {
  const Scalar w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const Scalar h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (w <= 0 || h <= 0) return Scalar(0);
  return w * h;
}

/// Smallest box enclosing both inputs.
template <typename Scalar>
BoxT<Scalar> enclosing_box(const BoxT<Scalar>& a, const BoxT<Scalar>& b) {
  typename BoxT<Scalar>::Coords hull;
  hull << a.coords().template head<2>().cwiseMin(b.coords().template head<2>()),
      a.coords().template tail<2>().cwiseMax(b.coords().template tail<2>());
  return BoxT<Scalar>(hull);
}

/// Intersection over union; 0 when the union is empty.
template <typename Scalar>
Scalar iou(const BoxT<Scalar>& a, const BoxT<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  const Scalar uni = a.area() + b.area() - inter;
  if (uni <= 0) return Scalar(0);
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar iou_distance(const BoxT<Scalar>& a, const BoxT<Scalar>& b) {
  return Scalar(1) - iou(a, b);
}

/// 1 - GIoU, in [0, 2].
template <typename Scalar>
Scalar giou_distance(const BoxT<Scalar>& a, const BoxT<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  const Scalar uni = a.area() + b.area() - inter;
  const Scalar hull = enclosing_box(a, b).area();
  if (hull <= 0) return Scalar(1) - iou(a, b);
  const Scalar overlap = uni > 0 ? inter / uni : Scalar(0);
  return Scalar(1) - (overlap - (hull - uni) / hull);
}

/// Euclidean distance between box centers divided by `norm`.
template <typename Scalar>
Scalar center_distance_normalized(const BoxT<Scalar>& a, const BoxT<Scalar>& b, Scalar norm) {
  if (!(norm > 0)) throw std::invalid_argument("center distance norm must be positive");
  return (a.center() - b.center()).norm() / norm;
}

}  // namespace boxrefine
