#include "boxrefine/simloop.hpp"

#include "boxrefine/errors.hpp"
#include "boxrefine/evaluation.hpp"
#include "boxrefine/parallel.hpp"
#include "boxrefine/transform.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace boxrefine {

Eigen::Vector4d SimDetectorParams::to_vector() const {
  return {localization_sigma, recall, fp_rate, score_sharpness};
}

SimDetectorParams SimDetectorParams::with_vector(const Eigen::Vector4d& v) const {
  SimDetectorParams out = *this;
  out.localization_sigma = std::max(0.0, v[0]);
  out.recall = std::clamp(v[1], 0.0, 1.0);
  out.fp_rate = std::max(0.0, v[2]);
  out.score_sharpness = std::max(1e-6, v[3]);
  return out;
}

void SimDetectorParams::validate() const {
  if (!(localization_sigma >= 0)) throw ConfigError("localization sigma must be >= 0");
  if (!(recall >= 0 && recall <= 1)) throw ConfigError("recall must lie in [0, 1]");
  if (!(fp_rate >= 0 && fp_rate <= 500)) throw ConfigError("fp_rate must lie in [0, 500]");
  if (!(score_sharpness > 0)) throw ConfigError("score sharpness must be positive");
  if (class_count < 1) throw ConfigError("class count must be positive");
  if (!(spurious_min_side > 0) || spurious_min_side > spurious_max_side) {
    throw ConfigError("spurious box sides must satisfy 0 < min <= max");
  }
}

std::vector<Detection> simulate_predictions(std::span<const Annotation> truth, int image_width,
                                            int image_height, const SimDetectorParams& params, Rng& rng) {
  params.validate();
  auto quality = [&](const Box& b) {
    double q = 0.0;
    for (const auto& t : truth) q = std::max(q, iou(b, t.box));
    return q;
  };
  auto emit = [&](const Box& b, int label) {
    return Detection::from_logit(b, label, params.score_sharpness * (2.0 * quality(b) - 1.0));
  };

  std::vector<Detection> out;
  for (const auto& t : truth) {
    // Draws happen whether or not the box is kept so streams stay aligned.
    const bool kept = rng.bernoulli(params.recall);
    Eigen::Vector4d c = t.box.coords();
    for (int k = 0; k < 4; ++k) c[k] += rng.normal(0.0, params.localization_sigma);
    if (!kept) continue;
    out.push_back(emit(Box(c).clipped(image_width, image_height), t.label));
  }
  const int spurious = rng.poisson(params.fp_rate);
  for (int i = 0; i < spurious; ++i) {
    const double w = rng.uniform(params.spurious_min_side, params.spurious_max_side);
    const double h = rng.uniform(params.spurious_min_side, params.spurious_max_side);
    const double cx = rng.uniform(0.0, image_width);
    const double cy = rng.uniform(0.0, image_height);
    const int label = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(params.class_count)));
    out.push_back(emit(Box::from_center({cx, cy}, w, h).clipped(image_width, image_height), label));
  }
  return out;
}

SimDetectorParams ImprovementSchedule::at(double weight) const {
  const double w = std::clamp(weight, 0.0, 1.0);
  return noisy_init.with_vector((1.0 - w) * noisy_init.to_vector() + w * oracle.to_vector());
}

void ScenarioConfig::validate() const {
  if (images < 1) throw ConfigError("scenario needs at least one image");
  if (min_objects < 1 || min_objects > max_objects) throw ConfigError("scenario object counts must satisfy 1 <= min <= max");
  if (width < 1 || height < 1) throw ConfigError("scenario image extent must be positive");
  if (!(min_side > 0) || min_side > max_side || max_side > std::min(width, height)) {
    throw ConfigError("scenario box sides must satisfy 0 < min <= max <= image extent");
  }
  if (class_count < 1) throw ConfigError("scenario class count must be positive");
}

Scenario make_scenario(const ScenarioConfig& cfg, const NoiseConfig& noise, unsigned workers) {
  cfg.validate();
  Scenario s;
  for (int c = 1; c <= cfg.class_count; ++c) s.truth.class_names.push_back("class" + std::to_string(c));
  s.truth.images.resize(static_cast<std::size_t>(cfg.images));

  parallel_for(s.truth.images.size(), workers, [&](std::size_t i) {
    ImageRecord& img = s.truth.images[i];
    char id[16];
    std::snprintf(id, sizeof id, "img%05zu", i);
    img.id = id;
    img.width = cfg.width;
    img.height = cfg.height;
    Rng rng(derive_seed(noise.seed, img.id, "scenario"));
    const int count = cfg.min_objects +
                      static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.max_objects - cfg.min_objects + 1)));
    // Rejection sampling keeps objects disjoint; give up after a bounded number of tries.
    for (int attempt = 0; attempt < 200 * count && static_cast<int>(img.annotations.size()) < count; ++attempt) {
      const double w = rng.uniform(cfg.min_side, cfg.max_side);
      const double h = rng.uniform(cfg.min_side, cfg.max_side);
      const double x = rng.uniform(0.0, cfg.width - w);
      const double y = rng.uniform(0.0, cfg.height - h);
      const int label = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.class_count)));
      const Box b(x, y, x + w, y + h);
      const bool overlaps = std::any_of(img.annotations.begin(), img.annotations.end(),
                                        [&](const Annotation& a) { return intersection_area(a.box, b) > 0; });
      if (!overlaps) img.annotations.push_back({b, label, Provenance::kOriginal});
    }
  });

  s.targets = apply_noise(s.truth, noise, workers);
  return s;
}

void LoopConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(keep_rate >= 0 && keep_rate <= 1)) throw ConfigError("EMA keep rate must lie in [0, 1]");
  correction.validate();
  noise.validate();
  scenario.validate();
  schedule.noisy_init.validate();
  schedule.oracle.validate();
}

namespace {

std::vector<Annotation> transformed(std::span<const Annotation> anns, std::span<const GeoTransform> chain) {
  std::vector<Annotation> out(anns.begin(), anns.end());
  for (auto& a : out) a.box = apply_transform(chain, a.box);
  return out;
}

std::vector<Detection> transformed(std::span<const Detection> dets, std::span<const GeoTransform> chain) {
  std::vector<Detection> out(dets.begin(), dets.end());
  for (auto& d : out) d.box = apply_transform(chain, d.box);
  return out;
}

bool aligned(std::span<const Annotation> a, std::span<const Annotation> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i].box.coords() - b[i].box.coords()).cwiseAbs().maxCoeff() > 1e-9) return false;
  }
  return true;
}

// A random flip of the image, or no-op (identity scale).
GeoTransform random_view(const ImageRecord& img, Rng& rng) {
  return rng.bernoulli(0.5) ? GeoTransform::horizontal_flip(img.width) : GeoTransform::scale(1.0, 1.0);
}

struct ImageStep {
  std::vector<Annotation> targets;  // original frame
  std::vector<Detection> predictions;
  CorrectionReport report;
  bool alignment_ok = true;
};

}  // namespace

std::vector<IterationRecord> run_loop(const Scenario& scenario, const LoopConfig& cfg, unsigned workers,
                                      const RenderHook& render) {
  cfg.validate();
  const Dataset& truth = scenario.truth;
  const Dataset& noisy = scenario.targets;
  if (truth.images.size() != noisy.images.size()) throw ValidationError("scenario truth and targets differ in image count");
  const bool correcting = cfg.correction.distance_limit || cfg.correction.mining_threshold;

  SimDetectorParams base = cfg.schedule.noisy_init;
  base.class_count = std::max(1, truth.class_count());

  // Both networks start from "standard training" on the raw noisy targets.
  const double initial_quality = quality_stats(truth, noisy).annotations_to_gt;
  EmaState ema;
  ema.keep_rate = cfg.keep_rate;
  ema.student = cfg.schedule.at(initial_quality).to_vector();
  ema.teacher = ema.student;

  std::vector<IterationRecord> trace;
  for (int it = 0; it < cfg.iterations; ++it) {
    const SimDetectorParams teacher = base.with_vector(Eigen::Vector4d(ema.teacher));
    std::vector<ImageStep> steps(truth.images.size());

    parallel_for(truth.images.size(), workers, [&](std::size_t i) {
      const ImageRecord& img = truth.images[i];
      const ImageRecord& targets = noisy.images[i];
      Rng rng(derive_seed(cfg.seed, img.id, "loop", static_cast<std::uint64_t>(it)));
      const std::vector<GeoTransform> weak{random_view(img, rng)};
      const std::vector<GeoTransform> to_original = inverse<double>(weak);

      const auto preds_weak = simulate_predictions(transformed(img.annotations, weak), img.width, img.height, teacher, rng);
      ImageStep& step = steps[i];
      std::vector<Annotation> corrected_weak = transformed(targets.annotations, weak);
      if (correcting) std::tie(corrected_weak, step.report) = correct_targets(corrected_weak, preds_weak, cfg.correction);

      // Student targets live in the strong view: undo the weak view, apply the strong one.
      std::vector<GeoTransform> align = to_original;
      align.push_back(random_view(img, rng));
      const auto student_targets = transformed(corrected_weak, align);
      step.alignment_ok = aligned(transformed(student_targets, inverse<double>(align)), corrected_weak);

      // Untouched targets skip the round trip, which is not bit-exact.
      step.targets = correcting ? transformed(corrected_weak, to_original) : targets.annotations;
      step.predictions = transformed(preds_weak, to_original);
    });

    Dataset targets_now;
    Dataset predictions_now;
    targets_now.class_names = predictions_now.class_names = truth.class_names;
    IterationRecord rec;
    rec.iteration = it;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const ImageRecord& img = truth.images[i];
      targets_now.images.push_back({.id = img.id, .width = img.width, .height = img.height, .annotations = steps[i].targets});
      predictions_now.images.push_back(
          {.id = img.id, .width = img.width, .height = img.height, .detections = steps[i].predictions});
      rec.targets += steps[i].targets.size();
      rec.corrected += steps[i].report.corrected_count;
      rec.mined += steps[i].report.mined_count;
      rec.alignment_ok = rec.alignment_ok && steps[i].alignment_ok;
    }
    const QualityStats q = quality_stats(truth, targets_now);
    rec.target_iou = q.annotations_to_gt;
    rec.truth_coverage = q.gt_to_annotations;
    rec.teacher_ap50 = evaluate_ap50(truth, predictions_now).map;

    if (render) {
      for (std::size_t i = 0; i < steps.size(); ++i) {
        ImageRecord view = targets_now.images[i];
        view.detections = steps[i].predictions;
        render(it, view, truth.images[i].annotations);
      }
    }

    ema.student = cfg.schedule.at(rec.target_iou).to_vector();
    ema = ema_update(ema);
    rec.teacher_params = ema.teacher;
    rec.student_params = ema.student;
    trace.push_back(rec);
  }
  return trace;
}

std::string to_json_line(const IterationRecord& r) {
  nlohmann::ordered_json j;
  j["iteration"] = r.iteration;
  j["target_iou"] = r.target_iou;
  j["truth_coverage"] = r.truth_coverage;
  j["teacher_ap50"] = r.teacher_ap50;
  j["targets"] = r.targets;
  j["corrected"] = r.corrected;
  j["mined"] = r.mined;
  j["alignment_ok"] = r.alignment_ok;
  j["teacher_params"] = {r.teacher_params[0], r.teacher_params[1], r.teacher_params[2], r.teacher_params[3]};
  j["student_params"] = {r.student_params[0], r.student_params[1], r.student_params[2], r.student_params[3]};
  return j.dump();
}

}  // namespace boxrefine
