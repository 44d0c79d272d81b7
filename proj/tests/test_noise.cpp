#include "boxrefine/errors.hpp"
#include "boxrefine/noise.hpp"
#include "boxrefine/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace boxrefine;

namespace {

Dataset grid_dataset(int images, int per_image) {
  Dataset ds;
  ds.class_names = {"a", "b"};
  for (int i = 0; i < images; ++i) {
    ImageRecord img{.id = "img" + std::to_string(i), .width = 640, .height = 480};
    for (int k = 0; k < per_image; ++k) {
      const double x = 20.0 + 60.0 * (k % 10), y = 20.0 + 60.0 * (k / 10);
      img.annotations.push_back({Box(x, y, x + 40, y + 30), 1 + k % 2, Provenance::kOriginal});
    }
    ds.images.push_back(img);
  }
  return ds;
}

}  // namespace

TEST(Rng, FixedStreamAndRanges) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform01();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.uniform_index(7), 7u);
    const int k = r.binomial(10, 0.5);
    EXPECT_GE(k, 0);
    EXPECT_LE(k, 10);
  }
  EXPECT_EQ(r.uniform(3.0, 3.0), 3.0);
  EXPECT_NE(derive_seed(1, "a", "x"), derive_seed(1, "b", "x"));
  EXPECT_NE(derive_seed(1, "a", "x"), derive_seed(1, "a", "y"));
  EXPECT_NE(derive_seed(1, "a", "x", 0), derive_seed(1, "a", "x", 1));
  EXPECT_EQ(derive_seed(9, "a", "x", 3), derive_seed(9, "a", "x", 3));
}

TEST(Rng, DistributionMoments) {
  Rng r(77);
  const int n = 100000;
  double sum = 0.0, sq = 0.0, pois = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal(2.0, 3.0);
    sum += v;
    sq += v * v;
    pois += r.poisson(4.0);
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 2.0, 0.05);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 3.0, 0.05);
  EXPECT_NEAR(pois / n, 4.0, 0.05);
}

TEST(RoundHalfAway, Examples) {
  EXPECT_EQ(round_half_away(2.5), 3);
  EXPECT_EQ(round_half_away(-2.5), -3);
  EXPECT_EQ(round_half_away(0.49), 0);
  EXPECT_EQ(round_half_away(3.5), 4);
}

TEST(Displace, ZeroNoiseIsIdentity) {
  const std::vector<Annotation> anns{{Box(1, 2, 30, 40), 1, Provenance::kOriginal},
                                     {Box(0, 0, 0.5, 0.25), 2, Provenance::kMined}};
  Rng rng(3);
  EXPECT_EQ(displace_boxes(anns, 0.0, 100, 100, rng), anns);
}

TEST(Displace, RawCoordinatesStayWithinBounds) {
  Rng rng(5);
  for (double nb : {0.05, 0.2, 0.4, 0.6}) {
    for (int i = 0; i < 2000; ++i) {
      const double x = rng.uniform(0, 400), y = rng.uniform(0, 400);
      const Box b(x, y, x + rng.uniform(1, 100), y + rng.uniform(1, 100));
      const auto c = displace_coordinates(b, nb, rng);
      EXPECT_LE(std::abs(c[0] - b.x1()), b.width() * nb + 1e-9);
      EXPECT_LE(std::abs(c[2] - b.x2()), b.width() * nb + 1e-9);
      EXPECT_LE(std::abs(c[1] - b.y1()), b.height() * nb + 1e-9);
      EXPECT_LE(std::abs(c[3] - b.y2()), b.height() * nb + 1e-9);
    }
  }
}

TEST(Displace, OutputIsCanonicalClippedAndNonDegenerate) {
  Rng rng(8);
  std::vector<Annotation> anns;
  for (int i = 0; i < 500; ++i) {
    const double x = rng.uniform(-10, 100), y = rng.uniform(-10, 100);
    anns.push_back({Box(x, y, x + rng.uniform(2, 40), y + rng.uniform(2, 40)), 1, Provenance::kOriginal});
  }
  const auto out = displace_boxes(anns, 0.9, 100, 100, rng);
  ASSERT_EQ(out.size(), anns.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Box& b = out[i].box;
    EXPECT_LE(b.x1(), b.x2());
    EXPECT_LE(b.y1(), b.y2());
    EXPECT_GE(b.x1(), 0.0);
    EXPECT_GE(b.y1(), 0.0);
    EXPECT_LE(b.x2(), 100.0);
    EXPECT_LE(b.y2(), 100.0);
    EXPECT_GE(b.width(), 1.0 - 1e-9);
    EXPECT_GE(b.height(), 1.0 - 1e-9);
    EXPECT_EQ(out[i].label, anns[i].label);
  }
}

TEST(Sparsify, ExactCounts) {
  Rng rng(1);
  std::vector<Annotation> ten;
  for (int i = 0; i < 10; ++i) ten.push_back({Box(i, 0, i + 1, 1), 1, Provenance::kOriginal});
  EXPECT_EQ(sparsify(ten, Sparsity::dropping(0.5), rng).size(), 5u);
  EXPECT_EQ(sparsify(ten, Sparsity::dropping(0.0), rng), ten);
  EXPECT_TRUE(sparsify(ten, Sparsity::dropping(1.0), rng).empty());
  EXPECT_EQ(sparsify(ten, Sparsity::dropping(0.25), rng).size(), 7u);  // round(2.5) = 3 removed

  const std::vector<Annotation> seven(ten.begin(), ten.begin() + 7);
  const auto one = sparsify(seven, Sparsity::one_per_image(), rng);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_NE(std::find(seven.begin(), seven.end(), one[0]), seven.end());
  EXPECT_TRUE(sparsify({}, Sparsity::one_per_image(), rng).empty());
}

TEST(Sparsify, SurvivorsKeepOrderAndAreUniform) {
  Rng rng(12);
  std::vector<Annotation> anns;
  for (int i = 0; i < 6; ++i) anns.push_back({Box(i, 0, i + 1, 1), 1, Provenance::kOriginal});
  std::vector<int> hits(6, 0);
  const int trials = 30000;
  for (int t = 0; t < trials; ++t) {
    const auto out = sparsify(anns, Sparsity::dropping(0.5), rng);
    for (std::size_t i = 1; i < out.size(); ++i) EXPECT_LT(out[i - 1].box.x1(), out[i].box.x1());
    for (const auto& a : out) hits[static_cast<int>(a.box.x1())]++;
  }
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / trials, 0.5, 0.02);
}

TEST(Superfluous, ZeroSuccessAddsNothing) {
  Rng rng(2);
  ImageRecord img{.id = "a", .width = 300, .height = 300, .annotations = {{Box(0, 0, 5, 5), 1, Provenance::kOriginal}}};
  const SuperfluousParams none{.trials = 10, .success = 0.0};
  EXPECT_EQ(inject_superfluous(img, none, 1, rng), img.annotations);
}

TEST(Superfluous, CountMeanAndSideRange) {
  Rng rng(99);
  const SuperfluousParams params;
  ImageRecord img{.id = "a", .width = 1000, .height = 1000};
  double total = 0.0;
  const int images = 10000;
  for (int i = 0; i < images; ++i) {
    const auto out = inject_superfluous(img, params, 3, rng);
    total += static_cast<double>(out.size());
    for (const auto& a : out) {
      EXPECT_GE(a.label, 1);
      EXPECT_LE(a.label, 3);
      EXPECT_GE(a.box.x1(), 0.0);
      EXPECT_LE(a.box.x2(), 1000.0);
      EXPECT_LE(a.box.width(), 196.0 + 1e-9);
      EXPECT_LE(a.box.height(), 196.0 + 1e-9);
    }
  }
  EXPECT_NEAR(total / images, 5.0, 0.1);

  // Away from the border no clipping happens, so sides span exactly [16, 196].
  ImageRecord huge{.id = "h", .width = 0, .height = 0};
  double lo = 1e9, hi = 0.0;
  for (int i = 0; i < 2000; ++i) {
    for (const auto& a : inject_superfluous(huge, params, 1, rng)) {
      lo = std::min({lo, a.box.width(), a.box.height()});
      hi = std::max({hi, a.box.width(), a.box.height()});
    }
  }
  EXPECT_GE(lo, 16.0);
  EXPECT_LE(hi, 196.0);
  EXPECT_LT(lo, 20.0);
  EXPECT_GT(hi, 190.0);
}

TEST(ApplyNoise, IdentityAtZeroNoise) {
  const Dataset clean = grid_dataset(4, 12);
  NoiseConfig cfg;
  cfg.seed = 5;
  NoiseSummary summary;
  EXPECT_EQ(apply_noise(clean, cfg, 1, &summary), clean);
  EXPECT_EQ(summary.annotations_before, 48u);
  EXPECT_EQ(summary.annotations_after, 48u);
}

TEST(ApplyNoise, InvariantsAndDeterminism) {
  const Dataset clean = grid_dataset(7, 10);
  const NoiseConfig cfg{.box_noise = 0.4, .sparsity = Sparsity::dropping(0.5), .superfluous = SuperfluousParams{},
                        .seed = 17};
  NoiseSummary summary;
  const Dataset noisy = apply_noise(clean, cfg, 1, &summary);
  EXPECT_EQ(noisy, apply_noise(clean, cfg, 4));
  EXPECT_EQ(noisy.class_names, clean.class_names);
  ASSERT_EQ(noisy.images.size(), clean.images.size());
  for (std::size_t i = 0; i < noisy.images.size(); ++i) {
    EXPECT_EQ(noisy.images[i].id, clean.images[i].id);
    EXPECT_EQ(noisy.images[i].width, clean.images[i].width);
    for (const auto& a : noisy.images[i].annotations) {
      EXPECT_GE(a.label, 1);
      EXPECT_LE(a.label, 2);
      EXPECT_EQ(a.provenance, Provenance::kOriginal);
    }
  }
  EXPECT_EQ(summary.annotations_before, 70u);
  EXPECT_EQ(summary.annotations_after, 35u + summary.superfluous_added);

  NoiseConfig other = cfg;
  other.seed = 18;
  EXPECT_NE(apply_noise(clean, other), noisy);
}

TEST(ApplyNoise, ExtremeKeepsOnePerImage) {
  const Dataset clean = grid_dataset(5, 7);
  const NoiseConfig cfg{.box_noise = 0.2, .sparsity = Sparsity::one_per_image(), .seed = 3};
  for (const auto& img : apply_noise(clean, cfg).images) EXPECT_EQ(img.annotations.size(), 1u);
}

TEST(NoiseConfig, Validation) {
  EXPECT_THROW((NoiseConfig{.box_noise = -0.1}.validate()), ConfigError);
  EXPECT_THROW((NoiseConfig{.sparsity = Sparsity::dropping(1.5)}.validate()), ConfigError);
  EXPECT_THROW((NoiseConfig{.superfluous = SuperfluousParams{.trials = -1}}.validate()), ConfigError);
  EXPECT_THROW((NoiseConfig{.superfluous = SuperfluousParams{.success = 2.0}}.validate()), ConfigError);
  EXPECT_THROW((NoiseConfig{.superfluous = SuperfluousParams{.min_side = 50, .max_side = 10}}.validate()), ConfigError);
  EXPECT_NO_THROW((NoiseConfig{.box_noise = 0.4, .sparsity = Sparsity::one_per_image()}.validate()));
}
