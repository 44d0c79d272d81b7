#include "boxrefine/evaluation.hpp"

#include "boxrefine/errors.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

namespace boxrefine {

namespace {

struct ScoredPrediction {
  std::size_t image = 0;  // index into ground_truth.images
  const Detection* det = nullptr;
};

// Predictions grouped by ground-truth image index, in dataset order.
std::vector<ScoredPrediction> collect_predictions(const Dataset& ground_truth, const Dataset& predictions) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < ground_truth.images.size(); ++i) index.emplace(ground_truth.images[i].id, i);

  std::vector<ScoredPrediction> out;
  std::string missing;
  for (const auto& img : predictions.images) {
    auto it = index.find(img.id);
    if (it == index.end()) {
      missing += " " + img.id;
      continue;
    }
    if (!img.detections) continue;
    for (const auto& d : *img.detections) out.push_back({it->second, &d});
  }
  if (!missing.empty()) throw ValidationError("prediction image ids missing from ground truth:" + missing);
  std::stable_sort(out.begin(), out.end(), [](const ScoredPrediction& a, const ScoredPrediction& b) {
    return a.det->prob > b.det->prob;
  });
  return out;
}

}  // namespace

double average_precision(const std::vector<double>& recall, const std::vector<double>& precision) {
  std::vector<double> r{0.0};
  std::vector<double> p{0.0};
  r.insert(r.end(), recall.begin(), recall.end());
  p.insert(p.end(), precision.begin(), precision.end());
  r.push_back(1.0);
  p.push_back(0.0);
  for (std::size_t i = p.size() - 1; i > 0; --i) p[i - 1] = std::max(p[i - 1], p[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < r.size(); ++i) ap += (r[i] - r[i - 1]) * p[i];
  return ap;
}

EvalResult evaluate_ap50(const Dataset& ground_truth, const Dataset& predictions) {
  const auto ranked = collect_predictions(ground_truth, predictions);

  std::set<int> classes;
  EvalResult result;
  for (const auto& img : ground_truth.images) {
    for (const auto& a : img.annotations) {
      classes.insert(a.label);
      ++result.counts[a.label].gt;
    }
  }
  for (const auto& sp : ranked) classes.insert(sp.det->label);

  for (int label : classes) {
    ClassCounts& counts = result.counts[label];
    std::vector<std::vector<bool>> matched(ground_truth.images.size());
    for (std::size_t i = 0; i < ground_truth.images.size(); ++i) {
      matched[i].assign(ground_truth.images[i].annotations.size(), false);
    }

    std::vector<double> recall;
    std::vector<double> precision;
    for (const auto& sp : ranked) {
      if (sp.det->label != label) continue;
      const auto& gts = ground_truth.images[sp.image].annotations;
      double best = 0.5;
      std::ptrdiff_t best_idx = -1;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].label != label || matched[sp.image][g]) continue;
        const double v = iou(sp.det->box, gts[g].box);
        if (v >= best && (best_idx < 0 || v > best)) {
          best = v;
          best_idx = static_cast<std::ptrdiff_t>(g);
        }
      }
      if (best_idx >= 0) {
        matched[sp.image][static_cast<std::size_t>(best_idx)] = true;
        ++counts.tp;
      } else {
        ++counts.fp;
      }
      if (counts.gt > 0) {
        recall.push_back(static_cast<double>(counts.tp) / static_cast<double>(counts.gt));
        precision.push_back(static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp));
      }
    }
    counts.fn = counts.gt - counts.tp;
    if (counts.gt > 0) result.ap[label] = average_precision(recall, precision);
  }

  if (!result.ap.empty()) {
    double sum = 0.0;
    for (const auto& [label, ap] : result.ap) sum += ap;
    result.map = sum / static_cast<double>(result.ap.size());
  }
  return result;
}

namespace {

// Mean over `from` boxes of the best IoU against `to` boxes in the same image.
std::pair<double, std::size_t> mean_best_iou(const Dataset& from, const Dataset& to) {
  std::unordered_map<std::string_view, const ImageRecord*> index;
  for (const auto& img : to.images) index.emplace(img.id, &img);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& img : from.images) {
    auto it = index.find(img.id);
    for (const auto& a : img.annotations) {
      double best = 0.0;
      if (it != index.end()) {
        for (const auto& b : it->second->annotations) best = std::max(best, iou(a.box, b.box));
      }
      sum += best;
      ++n;
    }
  }
  return {n > 0 ? sum / static_cast<double>(n) : 0.0, n};
}

}  // namespace

QualityStats quality_stats(const Dataset& ground_truth, const Dataset& annotations) {
  QualityStats s;
  std::tie(s.gt_to_annotations, s.gt_count) = mean_best_iou(ground_truth, annotations);
  std::tie(s.annotations_to_gt, s.annotation_count) = mean_best_iou(annotations, ground_truth);
  s.gt_to_annotations_defined = s.gt_count > 0;
  s.annotations_to_gt_defined = s.annotation_count > 0;
  return s;
}

ErrorBreakdown error_breakdown(const Dataset& ground_truth, const Dataset& predictions, double score_floor) {
  auto ranked = collect_predictions(ground_truth, predictions);
  ErrorBreakdown out;
  std::vector<std::vector<bool>> matched(ground_truth.images.size());
  for (std::size_t i = 0; i < ground_truth.images.size(); ++i) {
    matched[i].assign(ground_truth.images[i].annotations.size(), false);
    out.total_gt += ground_truth.images[i].annotations.size();
  }

  for (const auto& sp : ranked) {
    const Detection& d = *sp.det;
    if (d.prob < score_floor) continue;
    const auto& gts = ground_truth.images[sp.image].annotations;
    double best_same = 0.0;
    double best_other = 0.0;
    double best_free = 0.5;
    std::ptrdiff_t free_idx = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(d.box, gts[g].box);
      if (gts[g].label != d.label) {
        best_other = std::max(best_other, v);
        continue;
      }
      best_same = std::max(best_same, v);
      if (!matched[sp.image][g] && v > best_free) {
        best_free = v;
        free_idx = static_cast<std::ptrdiff_t>(g);
      }
    }

    if (std::max(best_same, best_other) <= 0.1) {
      ++out.background;
    } else if (free_idx >= 0) {
      matched[sp.image][static_cast<std::size_t>(free_idx)] = true;
      ++out.true_positive;
    } else if (best_same > 0.5) {
      ++out.duplicate;
    } else if (best_other > 0.5) {
      ++out.classification;
    } else if (best_same > 0.1) {
      ++out.localization;
    } else {
      ++out.both;
    }
  }
  out.missed = out.total_gt - out.true_positive;
  return out;
}

}  // namespace boxrefine
