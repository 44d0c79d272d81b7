#pragma once

#include "boxrefine/correction.hpp"
#include "boxrefine/noise.hpp"
#include "boxrefine/records.hpp"
#include "boxrefine/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace boxrefine {

/// Parametric stand-in for a detector's raw (pre-NMS) output.
struct SimDetectorParams {
  double localization_sigma = 0.0;  // pixels, per coordinate
  double recall = 1.0;
  double fp_rate = 0.0;  // expected spurious boxes per image
  double score_sharpness = 4.0;
  int class_count = 1;
  double spurious_min_side = 16.0;
  double spurious_max_side = 196.0;

  /// (sigma, recall, fp_rate, sharpness): the part that learns.
  Eigen::Vector4d to_vector() const;
  /// Copies `this` with the learnable part replaced, clamped into range.
  SimDetectorParams with_vector(const Eigen::Vector4d& v) const;

  void validate() const;

  friend bool operator==(const SimDetectorParams&, const SimDetectorParams&) = default;
};

/// Each true box survives with probability `recall` and is jittered by
/// N(0, sigma) per coordinate; Poisson(fp_rate) spurious boxes follow. Quality
/// q is the best IoU to any true box, logit = sharpness * (2q - 1).
std::vector<Detection> simulate_predictions(std::span<const Annotation> truth, int image_width,
                                            int image_height, const SimDetectorParams& params, Rng& rng);

/// Teacher/student parameter vectors with the EMA keep rate.
template <typename Scalar>
struct EmaStateT {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector teacher;
  Vector student;
  Scalar keep_rate = Scalar(0.99);
};

using EmaState = EmaStateT<double>;

/// teacher <- keep_rate * teacher + (1 - keep_rate) * student.
template <typename Scalar>
EmaStateT<Scalar> ema_update(const EmaStateT<Scalar>& state) {
  if (state.teacher.size() != state.student.size()) {
    throw std::invalid_argument("teacher and student parameter vectors differ in length");
  }
  if (!(state.keep_rate >= 0 && state.keep_rate <= 1)) throw std::invalid_argument("keep rate must lie in [0, 1]");
  EmaStateT<Scalar> next = state;
  next.teacher = state.keep_rate * state.teacher + (Scalar(1) - state.keep_rate) * state.student;
  return next;
}

/// Detector quality as a function of target quality: linear interpolation
/// between a detector trained on noisy labels and a near-perfect one.
struct ImprovementSchedule {
  SimDetectorParams noisy_init{.localization_sigma = 10.0, .recall = 0.6, .fp_rate = 1.0, .score_sharpness = 2.0};
  SimDetectorParams oracle{.localization_sigma = 1.0, .recall = 0.98, .fp_rate = 0.05, .score_sharpness = 6.0};

  SimDetectorParams at(double weight) const;

  friend bool operator==(const ImprovementSchedule&, const ImprovementSchedule&) = default;
};

struct ScenarioConfig {
  int images = 50;
  int min_objects = 3;
  int max_objects = 8;
  int width = 512;
  int height = 512;
  double min_side = 32.0;
  double max_side = 96.0;
  int class_count = 1;

  void validate() const;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Hidden truth plus the noisy targets derived from it.
struct Scenario {
  Dataset truth;
  Dataset targets;
};

/// Random non-overlapping objects per image, then noise from `noise`.
Scenario make_scenario(const ScenarioConfig& cfg, const NoiseConfig& noise, unsigned workers = 1);

struct LoopConfig {
  int iterations = 20;
  double keep_rate = 0.9;
  CorrectionConfig correction;
  NoiseConfig noise;
  ScenarioConfig scenario;
  ImprovementSchedule schedule;
  std::uint64_t seed = 0;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  /// Mean best IoU of each current target against the truth.
  double target_iou = 0.0;
  /// Mean best IoU of each true box against the current targets.
  double truth_coverage = 0.0;
  double teacher_ap50 = 0.0;
  std::size_t targets = 0;
  std::size_t corrected = 0;
  std::size_t mined = 0;
  bool alignment_ok = true;
  Eigen::Vector4d teacher_params = Eigen::Vector4d::Zero();
  Eigen::Vector4d student_params = Eigen::Vector4d::Zero();
};

/// Per-iteration view of one image for rendering: targets and teacher
/// predictions in original image coordinates.
using RenderHook = std::function<void(int iteration, const ImageRecord& image, std::span<const Annotation> truth)>;

/// Teacher predicts on a weak view, targets are corrected there and mapped to
/// the student's view, the student tracks target quality through the
/// schedule, and the teacher follows by EMA. The truth is used only to score.
std::vector<IterationRecord> run_loop(const Scenario& scenario, const LoopConfig& cfg, unsigned workers = 1,
                                      const RenderHook& render = {});

/// One JSON object per line, fixed key order.
std::string to_json_line(const IterationRecord& record);

}  // namespace boxrefine
