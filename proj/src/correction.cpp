#include "boxrefine/correction.hpp"

#include "boxrefine/errors.hpp"
#include "boxrefine/nms.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace boxrefine {

void CorrectionConfig::validate() const {
  if (!(temperature > 0)) throw ConfigError("softmax temperature must be positive");
  if (distance_limit && !(*distance_limit > 0)) throw ConfigError("distance limit must be positive");
  if (mining_threshold && !(*mining_threshold >= 0 && *mining_threshold <= 1)) {
    throw ConfigError("mining threshold must lie in [0, 1]");
  }
  if (!(mining_nms_iou >= 0 && mining_nms_iou <= 1)) throw ConfigError("mining NMS IoU must lie in [0, 1]");
  if (!(dedup_iou >= 0 && dedup_iou <= 1)) throw ConfigError("dedup IoU must lie in [0, 1]");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(convergence_eps > 0)) throw ConfigError("convergence_eps must be positive");
  if (!(center_norm > 0)) throw ConfigError("center norm must be positive");
  if (fixed_size && !(*fixed_size > 0)) throw ConfigError("fixed size must be positive");
}

double box_distance(const Box& a, const Box& b, const CorrectionConfig& cfg) {
  if (cfg.fixed_size) return center_distance_normalized(a, b, *cfg.fixed_size);
  switch (cfg.distance) {
    case DistanceKind::kIou: return iou_distance(a, b);
    case DistanceKind::kGiou: return giou_distance(a, b);
    case DistanceKind::kCenterNormalized: return center_distance_normalized(a, b, cfg.center_norm);
  }
  return iou_distance(a, b);
}

namespace {

// Snaps to a 2^-20 pixel grid so that x + side is exact and the re-expanded
// box has width == side bit-for-bit.
double snap(double v) { return std::ldexp(std::round(std::ldexp(v, 20)), -20); }

Box fixed_square(const Eigen::Vector2d& center, double side) {
  const double x1 = snap(center.x() - side / 2);
  const double y1 = snap(center.y() - side / 2);
  return Box(x1, y1, x1 + side, y1 + side);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  const Eigen::VectorXd e = (scores.array() - scores.maxCoeff()).exp().matrix();
  return e / e.sum();
}

struct ClassResult {
  int iterations = 0;
  bool converged = true;
};

// Refines boxes[target_idx] in place using preds[pred_idx]; all share one class.
ClassResult correct_class(std::span<const Annotation> targets, std::span<const Detection> preds,
                          const std::vector<std::size_t>& target_idx, const std::vector<std::size_t>& pred_idx,
                          const CorrectionConfig& cfg, std::vector<Box>& boxes,
                          std::vector<std::size_t>& assignment_sizes) {
  const auto nt = static_cast<Eigen::Index>(target_idx.size());
  const auto np = static_cast<Eigen::Index>(pred_idx.size());
  const double limit = *cfg.distance_limit;

  Eigen::Matrix<double, 4, Eigen::Dynamic> pred_coords(4, np);
  Eigen::Matrix<double, 2, Eigen::Dynamic> pred_centers(2, np);
  Eigen::VectorXd scores(np);
  for (Eigen::Index p = 0; p < np; ++p) {
    const Detection& d = preds[pred_idx[static_cast<std::size_t>(p)]];
    pred_coords.col(p) = d.box.coords();
    pred_centers.col(p) = d.box.center();
    scores[p] = d.logit / cfg.temperature;
  }

  // The limit is always measured against the original, uncorrected target.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> within_limit(nt, np);
  for (Eigen::Index t = 0; t < nt; ++t) {
    for (Eigen::Index p = 0; p < np; ++p) {
      within_limit(t, p) = box_distance(targets[target_idx[static_cast<std::size_t>(t)]].box,
                                        preds[pred_idx[static_cast<std::size_t>(p)]].box, cfg) <= limit;
    }
  }

  std::vector<Box> current(static_cast<std::size_t>(nt));
  for (Eigen::Index t = 0; t < nt; ++t) current[static_cast<std::size_t>(t)] = targets[target_idx[static_cast<std::size_t>(t)]].box;

  std::vector<Eigen::Index> assign(static_cast<std::size_t>(np), -1);
  std::vector<Eigen::Index> previous;
  ClassResult result;
  result.converged = false;

  for (int pass = 1; pass <= cfg.max_iterations; ++pass) {
    for (Eigen::Index p = 0; p < np; ++p) {
      const Box& pb = preds[pred_idx[static_cast<std::size_t>(p)]].box;
      Eigen::Index best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (Eigen::Index t = 0; t < nt; ++t) {
        const double dist = box_distance(current[static_cast<std::size_t>(t)], pb, cfg);
        if (dist < best_dist) {
          best_dist = dist;
          best = t;
        }
      }
      assign[static_cast<std::size_t>(p)] = within_limit(best, p) ? best : -1;
    }
    if (assign == previous) {
      result.converged = true;
      break;
    }
    result.iterations = pass;

    double max_move = 0.0;
    for (Eigen::Index t = 0; t < nt; ++t) {
      std::vector<Eigen::Index> members;
      for (Eigen::Index p = 0; p < np; ++p) {
        if (assign[static_cast<std::size_t>(p)] == t) members.push_back(p);
      }
      if (members.empty()) continue;

      const Eigen::VectorXd w = softmax(scores(members));
      Box updated = cfg.fixed_size ? fixed_square(pred_centers(Eigen::all, members) * w, *cfg.fixed_size)
                                   : Box(Eigen::Vector4d(pred_coords(Eigen::all, members) * w));
      Box& cur = current[static_cast<std::size_t>(t)];
      max_move = std::max(max_move, (updated.coords() - cur.coords()).cwiseAbs().maxCoeff());
      cur = updated;
    }
    previous = assign;
    if (max_move < cfg.convergence_eps) {
      result.converged = true;
      break;
    }
  }

  for (Eigen::Index t = 0; t < nt; ++t) {
    const std::size_t idx = target_idx[static_cast<std::size_t>(t)];
    boxes[idx] = current[static_cast<std::size_t>(t)];
    assignment_sizes[idx] = static_cast<std::size_t>(
        std::count(assign.begin(), assign.end(), t));
  }
  return result;
}

}  // namespace

std::pair<std::vector<Annotation>, CorrectionReport> correct_boxes(std::span<const Annotation> targets,
                                                                   std::span<const Detection> preds,
                                                                   const CorrectionConfig& cfg) {
  cfg.validate();
  if (!cfg.distance_limit) throw ConfigError("box correction requires a distance limit");

  CorrectionReport report;
  report.assignment_sizes.assign(targets.size(), 0);
  std::vector<Annotation> out(targets.begin(), targets.end());
  if (preds.empty() || targets.empty()) return {out, report};

  std::map<int, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_class;
  for (std::size_t t = 0; t < targets.size(); ++t) by_class[targets[t].label].first.push_back(t);
  for (std::size_t p = 0; p < preds.size(); ++p) {
    auto it = by_class.find(preds[p].label);
    if (it != by_class.end()) it->second.second.push_back(p);
  }

  std::vector<Box> boxes(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) boxes[t] = targets[t].box;

  for (const auto& [label, members] : by_class) {
    if (members.second.empty()) continue;
    const ClassResult r =
        correct_class(targets, preds, members.first, members.second, cfg, boxes, report.assignment_sizes);
    report.iterations = std::max(report.iterations, r.iterations);
    report.converged = report.converged && r.converged;
  }

  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (boxes[t] != targets[t].box) {
      out[t].box = boxes[t];
      out[t].provenance = Provenance::kCorrected;
      ++report.corrected_count;
    }
  }
  return {out, report};
}

std::vector<Annotation> mine_labels(std::span<const Annotation> targets, std::span<const Detection> preds,
                                    const CorrectionConfig& cfg) {
  cfg.validate();
  if (!cfg.mining_threshold) throw ConfigError("label mining requires a mining threshold");
  const double tau = *cfg.mining_threshold;

  std::vector<Detection> confident;
  for (const auto& d : preds) {
    if (d.prob >= tau) confident.push_back(d);
  }

  std::vector<Annotation> out(targets.begin(), targets.end());
  for (const auto& d : nms(confident, cfg.mining_nms_iou)) {
    const bool covered = std::any_of(targets.begin(), targets.end(), [&](const Annotation& t) {
      return t.label == d.label && iou(d.box, t.box) > cfg.dedup_iou;
    });
    if (!covered) out.push_back({d.box, d.label, Provenance::kMined});
  }
  return out;
}

std::pair<std::vector<Annotation>, CorrectionReport> correct_targets(std::span<const Annotation> targets,
                                                                     std::span<const Detection> preds,
                                                                     const CorrectionConfig& cfg) {
  cfg.validate();
  std::vector<Annotation> corrected(targets.begin(), targets.end());
  CorrectionReport report;
  report.assignment_sizes.assign(targets.size(), 0);
  if (cfg.distance_limit) std::tie(corrected, report) = correct_boxes(targets, preds, cfg);
  if (cfg.mining_threshold) {
    const std::size_t before = corrected.size();
    corrected = mine_labels(corrected, preds, cfg);
    report.mined_count = corrected.size() - before;
  }
  return {corrected, report};
}

}  // namespace boxrefine
