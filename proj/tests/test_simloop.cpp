#include "boxrefine/errors.hpp"
#include "boxrefine/simloop.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>

using namespace boxrefine;

namespace {

std::vector<Annotation> three_boxes() {
  return {{Box(10, 10, 50, 60), 1, Provenance::kOriginal},
          {Box(100, 100, 180, 150), 1, Provenance::kOriginal},
          {Box(300, 20, 340, 90), 1, Provenance::kOriginal}};
}

LoopConfig small_loop(std::uint64_t seed) {
  LoopConfig cfg;
  cfg.iterations = 5;
  cfg.seed = seed;
  cfg.scenario.images = 8;
  cfg.noise = {.box_noise = 0.4, .sparsity = Sparsity::one_per_image(), .seed = seed};
  cfg.correction.distance_limit = 0.6;
  cfg.correction.mining_threshold = 0.8;
  return cfg;
}

}  // namespace

TEST(SimulatePredictions, PerfectDetector) {
  Rng rng(1);
  const auto truth = three_boxes();
  const SimDetectorParams p{.localization_sigma = 0.0, .recall = 1.0, .fp_rate = 0.0};
  const auto preds = simulate_predictions(truth, 512, 512, p, rng);
  ASSERT_EQ(preds.size(), truth.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_EQ(preds[i].box, truth[i].box);
    EXPECT_GT(preds[i].prob, 0.5);
    EXPECT_EQ(preds[i].label, 1);
  }
}

TEST(SimulatePredictions, ZeroRecallLeavesOnlySpurious) {
  Rng rng(2);
  const SimDetectorParams none{.recall = 0.0, .fp_rate = 0.0};
  EXPECT_TRUE(simulate_predictions(three_boxes(), 512, 512, none, rng).empty());
  const SimDetectorParams spurious{.recall = 0.0, .fp_rate = 3.0};
  std::size_t total = 0;
  for (int i = 0; i < 2000; ++i) {
    for (const auto& d : simulate_predictions(three_boxes(), 512, 512, spurious, rng)) {
      EXPECT_NEAR(d.logit, 4.0 * (2.0 * [&] {
                    double q = 0.0;
                    for (const auto& t : three_boxes()) q = std::max(q, iou(t.box, d.box));
                    return q;
                  }() - 1.0),
                  1e-12);
      ++total;
    }
  }
  EXPECT_NEAR(static_cast<double>(total) / 2000.0, 3.0, 0.15);
}

TEST(SimulatePredictions, RecallFrequency) {
  Rng rng(3);
  const SimDetectorParams p{.localization_sigma = 2.0, .recall = 0.7};
  const std::vector<Annotation> one{{Box(100, 100, 150, 150), 1, Provenance::kOriginal}};
  int emitted = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) emitted += static_cast<int>(simulate_predictions(one, 512, 512, p, rng).size());
  EXPECT_NEAR(static_cast<double>(emitted) / trials, 0.7, 0.01);
}

TEST(SimulatePredictions, DeterministicPerSeed) {
  const SimDetectorParams p{.localization_sigma = 5.0, .recall = 0.8, .fp_rate = 2.0};
  Rng a(9), b(9);
  EXPECT_EQ(simulate_predictions(three_boxes(), 512, 512, p, a), simulate_predictions(three_boxes(), 512, 512, p, b));
}

TEST(Ema, Examples) {
  EmaState s;
  s.teacher = Eigen::VectorXd::Constant(1, 1.0);
  s.student = Eigen::VectorXd::Constant(1, 0.0);
  s.keep_rate = 0.95;
  const auto next = ema_update(s);
  EXPECT_DOUBLE_EQ(next.teacher[0], 0.95);
  EXPECT_EQ(next.student, s.student);

  s.keep_rate = 1.0;
  EXPECT_EQ(ema_update(s).teacher, s.teacher);

  EmaState bad = s;
  bad.student = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(ema_update(bad), std::invalid_argument);
}

TEST(Ema, GeometricClosedForm) {
  EmaState s;
  s.teacher = Eigen::Vector3d(1.0, -2.0, 0.5);
  s.student = Eigen::Vector3d(0.25, 3.0, 0.5);
  s.keep_rate = 0.99;
  const Eigen::VectorXd start = s.teacher;
  for (int n = 1; n <= 1000; ++n) {
    s = ema_update(s);
    const Eigen::VectorXd expect = s.student + std::pow(0.99, n) * (start - s.student);
    EXPECT_LE((s.teacher - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Ema, FloatScalar) {
  EmaStateT<float> s;
  s.teacher = Eigen::VectorXf::Constant(2, 1.f);
  s.student = Eigen::VectorXf::Zero(2);
  s.keep_rate = 0.5f;
  EXPECT_FLOAT_EQ(ema_update(s).teacher[1], 0.5f);
}

TEST(Schedule, EndpointsAndClamp) {
  const ImprovementSchedule sched;
  EXPECT_EQ(sched.at(0.0).to_vector(), sched.noisy_init.to_vector());
  EXPECT_EQ(sched.at(1.0).to_vector(), sched.oracle.to_vector());
  EXPECT_EQ(sched.at(3.0).to_vector(), sched.oracle.to_vector());
  EXPECT_LT(sched.at(0.8).localization_sigma, sched.at(0.2).localization_sigma);
}

TEST(Scenario, ObjectsDisjointAndDeterministic) {
  ScenarioConfig cfg;
  cfg.images = 10;
  const NoiseConfig noise{.box_noise = 0.4, .sparsity = Sparsity::one_per_image(), .seed = 4};
  const auto s = make_scenario(cfg, noise);
  EXPECT_EQ(s.truth, make_scenario(cfg, noise, 3).truth);
  EXPECT_EQ(s.targets, make_scenario(cfg, noise, 3).targets);
  for (std::size_t i = 0; i < s.truth.images.size(); ++i) {
    const auto& anns = s.truth.images[i].annotations;
    EXPECT_GE(anns.size(), 3u);
    EXPECT_LE(anns.size(), 8u);
    for (std::size_t a = 0; a < anns.size(); ++a) {
      for (std::size_t b = a + 1; b < anns.size(); ++b) EXPECT_EQ(intersection_area(anns[a].box, anns[b].box), 0.0);
    }
    EXPECT_EQ(s.targets.images[i].annotations.size(), 1u);
  }
}

TEST(RunLoop, CleanScenarioWithoutCorrectionStaysPerfect) {
  LoopConfig cfg = small_loop(1);
  cfg.noise = {.seed = 1};
  cfg.correction.distance_limit.reset();
  cfg.correction.mining_threshold.reset();
  const auto scenario = make_scenario(cfg.scenario, cfg.noise);
  for (const auto& r : run_loop(scenario, cfg)) {
    EXPECT_EQ(r.target_iou, 1.0);
    EXPECT_EQ(r.truth_coverage, 1.0);
  }
}

TEST(RunLoop, CorrectionOffIsFlat) {
  LoopConfig cfg = small_loop(2);
  cfg.correction.distance_limit.reset();
  cfg.correction.mining_threshold.reset();
  const auto scenario = make_scenario(cfg.scenario, cfg.noise);
  const auto trace = run_loop(scenario, cfg);
  for (const auto& r : trace) {
    EXPECT_EQ(r.target_iou, trace[0].target_iou);
    EXPECT_EQ(r.corrected, 0u);
    EXPECT_EQ(r.mined, 0u);
  }
}

TEST(RunLoop, TraceShapeAndRanges) {
  const LoopConfig cfg = small_loop(3);
  const auto scenario = make_scenario(cfg.scenario, cfg.noise);
  const auto trace = run_loop(scenario, cfg);
  ASSERT_EQ(trace.size(), 5u);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    EXPECT_EQ(trace[i].iteration, static_cast<int>(i));
    EXPECT_TRUE(trace[i].alignment_ok);
    for (double v : {trace[i].target_iou, trace[i].truth_coverage, trace[i].teacher_ap50}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  const auto j = nlohmann::json::parse(to_json_line(trace[0]));
  EXPECT_EQ(j["iteration"], 0);
  EXPECT_EQ(j["teacher_params"].size(), 4u);
}

TEST(RunLoop, WorkerCountDoesNotMatter) {
  const LoopConfig cfg = small_loop(4);
  const auto scenario = make_scenario(cfg.scenario, cfg.noise);
  const auto a = run_loop(scenario, cfg, 1);
  const auto b = run_loop(scenario, cfg, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_json_line(a[i]), to_json_line(b[i]));
}

TEST(RunLoop, RenderHookSeesEveryImage) {
  const LoopConfig cfg = small_loop(5);
  const auto scenario = make_scenario(cfg.scenario, cfg.noise);
  int calls = 0;
  run_loop(scenario, cfg, 1, [&](int, const ImageRecord& img, std::span<const Annotation>) {
    ++calls;
    EXPECT_TRUE(img.detections.has_value());
  });
  EXPECT_EQ(calls, cfg.iterations * cfg.scenario.images);
}

TEST(RunLoop, InvalidConfig) {
  LoopConfig cfg = small_loop(6);
  cfg.iterations = 0;
  const auto scenario = make_scenario(cfg.scenario, cfg.noise);
  EXPECT_THROW(run_loop(scenario, cfg), ConfigError);
}
