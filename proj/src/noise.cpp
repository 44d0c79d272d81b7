#include "boxrefine/noise.hpp"

#include "boxrefine/errors.hpp"
#include "boxrefine/parallel.hpp"

#include <cmath>
#include <numeric>

namespace boxrefine {

void NoiseConfig::validate() const {
  if (!(box_noise >= 0) || !std::isfinite(box_noise)) throw ConfigError("box noise level must be >= 0");
  if (!sparsity.extreme && !(sparsity.fraction >= 0 && sparsity.fraction <= 1)) {
    throw ConfigError("sparsity fraction must lie in [0, 1]");
  }
  if (superfluous) {
    const auto& s = *superfluous;
    if (s.trials < 1) throw ConfigError("superfluous trials must be positive");
    if (!(s.success >= 0 && s.success <= 1)) throw ConfigError("superfluous success must lie in [0, 1]");
    if (!(s.min_side > 0) || !(s.max_side > 0)) throw ConfigError("superfluous sides must be positive");
    if (s.min_side > s.max_side) throw ConfigError("superfluous min_side exceeds max_side");
  }
}

long long round_half_away(double v) { return static_cast<long long>(std::round(v)); }

std::array<double, 4> displace_coordinates(const Box& box, double box_noise, Rng& rng) {
  const double dx = box.width() * box_noise;
  const double dy = box.height() * box_noise;
  const double x1 = box.x1() + rng.uniform(-dx, dx);
  const double x2 = box.x2() + rng.uniform(-dx, dx);
  const double y1 = box.y1() + rng.uniform(-dy, dy);
  const double y2 = box.y2() + rng.uniform(-dy, dy);
  return {x1, y1, x2, y2};
}

namespace {

// Grows [lo, hi] symmetrically to `min_len`, then shifts it back inside
// [0, extent] when the extent is known and large enough.
void enforce_min_extent(double& lo, double& hi, double min_len, double extent) {
  if (hi - lo >= min_len) return;
  const double mid = (lo + hi) / 2;
  lo = mid - min_len / 2;
  hi = mid + min_len / 2;
  if (extent >= min_len) {
    if (lo < 0) {
      hi -= lo;
      lo = 0;
    }
    if (hi > extent) {
      lo -= hi - extent;
      hi = extent;
    }
  }
}

}  // namespace

std::vector<Annotation> displace_boxes(std::span<const Annotation> anns, double box_noise,
                                       int image_width, int image_height, Rng& rng) {
  std::vector<Annotation> out;
  out.reserve(anns.size());
  for (const auto& a : anns) {
    const auto raw = displace_coordinates(a.box, box_noise, rng);
    Box b = Box(raw[0], raw[1], raw[2], raw[3]).clipped(image_width, image_height);
    double x1 = b.x1(), y1 = b.y1(), x2 = b.x2(), y2 = b.y2();
    enforce_min_extent(x1, x2, std::min(1.0, a.box.width()), image_width);
    enforce_min_extent(y1, y2, std::min(1.0, a.box.height()), image_height);
    out.push_back({Box(x1, y1, x2, y2), a.label, a.provenance});
  }
  return out;
}

namespace {

// Indices of `k` distinct elements of [0, n), by partial Fisher-Yates.
std::vector<bool> choose_removed(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<bool> removed(n, false);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(idx[i], idx[j]);
    removed[idx[i]] = true;
  }
  return removed;
}

std::size_t removal_count(std::size_t n, double fraction) {
  const long long k = round_half_away(fraction * static_cast<double>(n));
  return static_cast<std::size_t>(std::clamp<long long>(k, 0, static_cast<long long>(n)));
}

}  // namespace

std::vector<Annotation> sparsify(std::span<const Annotation> anns, const Sparsity& sparsity, Rng& rng) {
  if (anns.empty()) return {};
  if (sparsity.extreme) {
    return {anns[static_cast<std::size_t>(rng.uniform_index(anns.size()))]};
  }
  const auto removed = choose_removed(anns.size(), removal_count(anns.size(), sparsity.fraction), rng);
  std::vector<Annotation> out;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    if (!removed[i]) out.push_back(anns[i]);
  }
  return out;
}

std::vector<Annotation> inject_superfluous(const ImageRecord& record, const SuperfluousParams& params,
                                           int class_count, Rng& rng) {
  std::vector<Annotation> out = record.annotations;
  const int k = rng.binomial(params.trials, params.success);
  const int classes = std::max(1, class_count);
  for (int i = 0; i < k; ++i) {
    const double w = rng.uniform(params.min_side, params.max_side);
    const double h = rng.uniform(params.min_side, params.max_side);
    const double cx = rng.uniform(0.0, record.width);
    const double cy = rng.uniform(0.0, record.height);
    const int label = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
    const Box b = Box::from_center({cx, cy}, w, h).clipped(record.width, record.height);
    out.push_back({b, label, Provenance::kOriginal});
  }
  return out;
}

Dataset apply_noise(const Dataset& clean, const NoiseConfig& cfg, unsigned workers, NoiseSummary* summary) {
  cfg.validate();
  clean.validate();
  Dataset out = clean;
  const std::size_t before = clean.annotation_count();

  parallel_for(out.images.size(), workers, [&](std::size_t i) {
    ImageRecord& img = out.images[i];
    Rng rng(derive_seed(cfg.seed, img.id, "displace"));
    img.annotations = displace_boxes(img.annotations, cfg.box_noise, img.width, img.height, rng);
  });

  if (cfg.sparsity.extreme) {
    parallel_for(out.images.size(), workers, [&](std::size_t i) {
      ImageRecord& img = out.images[i];
      Rng rng(derive_seed(cfg.seed, img.id, "sparsify"));
      img.annotations = sparsify(img.annotations, cfg.sparsity, rng);
    });
  } else if (cfg.sparsity.fraction > 0) {
    Rng rng(derive_seed(cfg.seed, "", "sparsify"));
    const auto removed = choose_removed(before, removal_count(before, cfg.sparsity.fraction), rng);
    std::size_t flat = 0;
    for (auto& img : out.images) {
      std::vector<Annotation> kept;
      for (const auto& a : img.annotations) {
        if (!removed[flat++]) kept.push_back(a);
      }
      img.annotations = std::move(kept);
    }
  }

  const std::size_t after_sparsify = out.annotation_count();
  if (cfg.superfluous) {
    parallel_for(out.images.size(), workers, [&](std::size_t i) {
      ImageRecord& img = out.images[i];
      Rng rng(derive_seed(cfg.seed, img.id, "superfluous"));
      img.annotations = inject_superfluous(img, *cfg.superfluous, out.class_count(), rng);
    });
  }

  if (summary) {
    summary->annotations_before = before;
    summary->annotations_after = out.annotation_count();
    summary->superfluous_added = summary->annotations_after - after_sparsify;
  }
  return out;
}

}  // namespace boxrefine
