#pragma once

#include "boxrefine/records.hpp"
#include "boxrefine/rng.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace boxrefine {

/// Fraction of annotations to drop, or keep-one-per-image ("extreme").
struct Sparsity {
  bool extreme = false;
  double fraction = 0.0;

  static Sparsity none() { return {}; }
  static Sparsity dropping(double fraction) { return {false, fraction}; }
  static Sparsity one_per_image() { return {true, 0.0}; }

  friend bool operator==(const Sparsity&, const Sparsity&) = default;
};

struct SuperfluousParams {
  int trials = 10;
  double success = 0.5;
  double min_side = 16.0;
  double max_side = 196.0;

  friend bool operator==(const SuperfluousParams&, const SuperfluousParams&) = default;
};

struct NoiseConfig {
  double box_noise = 0.0;
  Sparsity sparsity;
  std::optional<SuperfluousParams> superfluous;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;

  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

/// Half-away-from-zero rounding, identical on every platform.
long long round_half_away(double v);

/// Raw displaced coordinates (x1, y1, x2, y2) before canonicalization and
/// clipping. Draw order: x1, x2, y1, y2, each independent.
std::array<double, 4> displace_coordinates(const Box& box, double box_noise, Rng& rng);

/// Shifts every horizontal coordinate by U[-w*Nb, w*Nb] and every vertical one
/// by U[-h*Nb, h*Nb]. Crossed coordinates are swapped, boxes clipped to the
/// image (when its extent is known) and kept at least min(1, original side)
/// pixels wide.
std::vector<Annotation> displace_boxes(std::span<const Annotation> anns, double box_noise,
                                       int image_width, int image_height, Rng& rng);

/// Fraction mode removes exactly round(fraction * N) annotations chosen
/// uniformly; extreme mode keeps exactly one (empty input stays empty).
/// Survivors keep their order.
std::vector<Annotation> sparsify(std::span<const Annotation> anns, const Sparsity& sparsity, Rng& rng);

/// Existing annotations followed by k ~ Binomial(trials, success) random boxes.
std::vector<Annotation> inject_superfluous(const ImageRecord& record, const SuperfluousParams& params,
                                           int class_count, Rng& rng);

struct NoiseSummary {
  std::size_t annotations_before = 0;
  std::size_t annotations_after = 0;
  std::size_t superfluous_added = 0;
};

/// Applies displacement, then sparsification, then superfluous injection to a
/// whole dataset. Per-image streams come from derive_seed, so the result does
/// not depend on `workers`. Fraction-mode sparsification is dataset-wide.
Dataset apply_noise(const Dataset& clean, const NoiseConfig& cfg, unsigned workers = 1,
                    NoiseSummary* summary = nullptr);

}  // namespace boxrefine
