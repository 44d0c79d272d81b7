#include "boxrefine/records.hpp"

#include "boxrefine/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <utility>

namespace boxrefine {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kOriginal: return "original";
    case Provenance::kCorrected: return "corrected";
    case Provenance::kMined: return "mined";
  }
  return "original";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "original") return Provenance::kOriginal;
  if (s == "corrected") return Provenance::kCorrected;
  if (s == "mined") return Provenance::kMined;
  throw ParseError("unknown provenance '" + std::string(s) + "'");
}

double sigmoid(double logit) { return 1.0 / (1.0 + std::exp(-logit)); }

double logit_from_prob(double prob) {
  const double p = std::clamp(prob, 1e-6, 1.0 - 1e-6);
  return std::log(p / (1.0 - p));
}

Detection Detection::from_logit(const Box& box, int label, double logit) {
  return {box, label, sigmoid(logit), logit};
}

Detection Detection::from_prob(const Box& box, int label, double prob) {
  return {box, label, prob, logit_from_prob(prob)};
}

const ImageRecord* Dataset::find(std::string_view image_id) const {
  auto it = std::find_if(images.begin(), images.end(),
                         [&](const ImageRecord& r) { return r.id == image_id; });
  return it == images.end() ? nullptr : &*it;
}

ImageRecord* Dataset::find(std::string_view image_id) {
  return const_cast<ImageRecord*>(std::as_const(*this).find(image_id));
}

std::size_t Dataset::annotation_count() const {
  std::size_t n = 0;
  for (const auto& img : images) n += img.annotations.size();
  return n;
}

void Dataset::validate() const {
  std::set<std::string_view> seen;
  std::string dupes;
  for (const auto& img : images) {
    if (!seen.insert(img.id).second) dupes += (dupes.empty() ? "" : ", ") + img.id;
  }
  if (!dupes.empty()) throw ValidationError("duplicate image ids: " + dupes);
}

namespace {

Annotation point_box(const PointAnnotation& p, double side) {
  return {Box(p.x - side / 2, p.y - side / 2, p.x + side / 2, p.y + side / 2), p.label,
          Provenance::kOriginal};
}

void check_side(double side) {
  if (!(side > 0)) throw std::invalid_argument("point box side must be positive");
}

}  // namespace

std::vector<Annotation> points_to_boxes(std::span<const PointAnnotation> points, double side) {
  check_side(side);
  std::vector<Annotation> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(point_box(p, side));
  return out;
}

std::vector<Annotation> points_to_boxes(std::span<const PointAnnotation> points, double side,
                                        const Dataset& images) {
  check_side(side);
  std::unordered_map<std::string_view, const ImageRecord*> index;
  for (const auto& img : images.images) index.emplace(img.id, &img);

  std::set<std::string> unknown;
  std::vector<Annotation> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    auto it = index.find(p.image_id);
    if (it == index.end()) {
      unknown.insert(p.image_id);
      continue;
    }
    Annotation a = point_box(p, side);
    a.box = a.box.clipped(it->second->width, it->second->height);
    out.push_back(a);
  }
  if (!unknown.empty()) {
    std::string msg = "points reference unknown image ids:";
    for (const auto& id : unknown) msg += " " + id;
    throw ValidationError(msg);
  }
  return out;
}

void materialize_points(Dataset& dataset, double side) {
  check_side(side);
  for (auto& img : dataset.images) {
    for (const auto& p : img.points) {
      Annotation a = point_box(p, side);
      a.box = a.box.clipped(img.width, img.height);
      img.annotations.push_back(a);
    }
    img.points.clear();
  }
}

}  // namespace boxrefine
