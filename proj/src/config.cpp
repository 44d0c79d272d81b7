#include "boxrefine/config.hpp"

#include "boxrefine/errors.hpp"

#include <charconv>

namespace boxrefine {

using nlohmann::json;
using nlohmann::ordered_json;

LoopConfig RunConfig::loop_config() const {
  LoopConfig lc;
  lc.iterations = loop.iterations;
  lc.keep_rate = loop.keep_rate;
  lc.correction = correction;
  if (!loop.correction_enabled) {
    lc.correction.distance_limit.reset();
    lc.correction.mining_threshold.reset();
  }
  lc.noise = noise;
  lc.noise.seed = seed;
  lc.scenario = loop.scenario;
  lc.schedule = loop.schedule;
  lc.seed = seed;
  return lc;
}

const std::vector<Profile>& builtin_profiles() {
  static const std::vector<Profile> profiles = [] {
    const auto ex = Sparsity::one_per_image();
    const auto half = Sparsity::dropping(0.5);
    const auto full = Sparsity::none();
    return std::vector<Profile>{
        {"edmonton", 0.5, 0.8, 60.0, 0.95, std::nullopt, std::nullopt},
        {"nb0-s0", 0.1, 0.95, std::nullopt, std::nullopt, 0.0, full},
        {"nb0-s50", std::nullopt, 0.9, std::nullopt, std::nullopt, 0.0, half},
        {"nb0-ex", std::nullopt, 0.8, std::nullopt, std::nullopt, 0.0, ex},
        {"nb20-s0", 0.35, std::nullopt, std::nullopt, std::nullopt, 0.2, full},
        {"nb20-s50", 0.35, 0.9, std::nullopt, std::nullopt, 0.2, half},
        {"nb20-ex", 0.35, 0.8, std::nullopt, std::nullopt, 0.2, ex},
        {"nb40-s0", 0.6, std::nullopt, std::nullopt, std::nullopt, 0.4, full},
        {"nb40-s50", 0.6, 0.8, std::nullopt, std::nullopt, 0.4, half},
        {"nb40-ex", 0.6, 0.8, std::nullopt, std::nullopt, 0.4, ex},
        {"faster-rcnn", 0.6, 0.8, std::nullopt, std::nullopt, 0.4, ex},
        {"retinanet", 0.6, 0.4, std::nullopt, std::nullopt, 0.4, ex},
        {"fcos", 0.6, 0.5, std::nullopt, std::nullopt, 0.4, ex},
    };
  }();
  return profiles;
}

const Profile& find_profile(const std::string& name) {
  for (const auto& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  std::string known;
  for (const auto& p : builtin_profiles()) known += " " + p.name;
  throw ConfigError("unknown profile '" + name + "'; known:" + known);
}

void apply_profile(RunConfig& cfg, const Profile& p) {
  cfg.profile = p.name;
  cfg.correction.temperature = 0.2;
  cfg.correction.distance_limit = p.distance_limit;
  cfg.correction.mining_threshold = p.mining_threshold;
  cfg.correction.fixed_size = p.fixed_size;
  if (p.fixed_size) {
    cfg.correction.distance = DistanceKind::kCenterNormalized;
    cfg.correction.center_norm = *p.fixed_size;
  } else {
    cfg.correction.distance = DistanceKind::kIou;
  }
  if (p.keep_rate) cfg.loop.keep_rate = *p.keep_rate;
  if (p.box_noise) cfg.noise.box_noise = *p.box_noise;
  if (p.sparsity) cfg.noise.sparsity = *p.sparsity;
}

std::string distance_name(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::kIou: return "iou";
    case DistanceKind::kGiou: return "giou";
    case DistanceKind::kCenterNormalized: return "center";
  }
  return "iou";
}

DistanceKind parse_distance(const std::string& name) {
  if (name == "iou") return DistanceKind::kIou;
  if (name == "giou") return DistanceKind::kGiou;
  if (name == "center") return DistanceKind::kCenterNormalized;
  throw ConfigError("unknown distance '" + name + "' (expected iou, giou or center)");
}

Sparsity parse_sparsity(const std::string& text) {
  if (text == "ex" || text == "extreme") return Sparsity::one_per_image();
  std::string s = text;
  double scale = 1.0;
  if (!s.empty() && s.back() == '%') {
    s.pop_back();
    scale = 0.01;
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("invalid sparsity '" + text + "'");
  return Sparsity::dropping(v * scale);
}

namespace {

template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json sparsity_json(const Sparsity& s) { return s.extreme ? ordered_json("ex") : ordered_json(s.fraction); }

ordered_json detector_json(const SimDetectorParams& p) {
  return {{"localization_sigma", p.localization_sigma}, {"recall", p.recall},
          {"fp_rate", p.fp_rate},                       {"score_sharpness", p.score_sharpness},
          {"spurious_min_side", p.spurious_min_side},   {"spurious_max_side", p.spurious_max_side}};
}

// Reads j[key] into out when present; null resets optionals.
template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, key, v, where);
  out = v;
}

void read_sparsity(const json& j, Sparsity& out) {
  if (!j.contains("sparsity")) return;
  const json& v = j["sparsity"];
  if (v.is_string()) {
    out = parse_sparsity(v.get<std::string>());
  } else if (v.is_number()) {
    out = Sparsity::dropping(v.get<double>());
  } else {
    throw ConfigError("noise.sparsity: expected \"ex\" or a fraction");
  }
}

void read_detector(const json& j, SimDetectorParams& p, const std::string& where) {
  read(j, "localization_sigma", p.localization_sigma, where);
  read(j, "recall", p.recall, where);
  read(j, "fp_rate", p.fp_rate, where);
  read(j, "score_sharpness", p.score_sharpness, where);
  read(j, "spurious_min_side", p.spurious_min_side, where);
  read(j, "spurious_max_side", p.spurious_max_side, where);
}

}  // namespace

ordered_json to_json(const CorrectionConfig& c) {
  return {{"distance", distance_name(c.distance)},
          {"center_norm", c.center_norm},
          {"distance_limit", opt(c.distance_limit)},
          {"temperature", c.temperature},
          {"mining_threshold", opt(c.mining_threshold)},
          {"mining_nms_iou", c.mining_nms_iou},
          {"dedup_iou", c.dedup_iou},
          {"max_iterations", c.max_iterations},
          {"convergence_eps", c.convergence_eps},
          {"fixed_size", opt(c.fixed_size)}};
}

ordered_json to_json(const NoiseConfig& n) {
  ordered_json sup = nullptr;
  if (n.superfluous) {
    sup = {{"trials", n.superfluous->trials},
           {"success", n.superfluous->success},
           {"min_side", n.superfluous->min_side},
           {"max_side", n.superfluous->max_side}};
  }
  return {{"box_noise", n.box_noise}, {"sparsity", sparsity_json(n.sparsity)}, {"superfluous", sup}};
}

ordered_json to_json(const CorrectionReport& r) {
  return {{"iterations", r.iterations},
          {"converged", r.converged},
          {"assignment_sizes", r.assignment_sizes},
          {"corrected", r.corrected_count},
          {"mined", r.mined_count}};
}

ordered_json to_json(const RunConfig& cfg) {
  const auto& sc = cfg.loop.scenario;
  return {{"command", cfg.command},
          {"seed", cfg.seed},
          {"profile", opt(cfg.profile)},
          {"out", cfg.out_dir},
          {"inputs",
           {{"input", cfg.inputs.input},
            {"targets", cfg.inputs.targets},
            {"detections", cfg.inputs.detections},
            {"ground_truth", cfg.inputs.ground_truth},
            {"predictions", cfg.inputs.predictions},
            {"annotations", cfg.inputs.annotations},
            {"points_csv", cfg.inputs.points_csv},
            {"point_side", cfg.inputs.point_side}}},
          {"noise", to_json(cfg.noise)},
          {"correction", to_json(cfg.correction)},
          {"loop",
           {{"iterations", cfg.loop.iterations},
            {"keep_rate", cfg.loop.keep_rate},
            {"correction_enabled", cfg.loop.correction_enabled},
            {"render", cfg.loop.render},
            {"scenario",
             {{"images", sc.images},
              {"min_objects", sc.min_objects},
              {"max_objects", sc.max_objects},
              {"width", sc.width},
              {"height", sc.height},
              {"min_side", sc.min_side},
              {"max_side", sc.max_side},
              {"class_count", sc.class_count}}},
            {"schedule",
             {{"noisy_init", detector_json(cfg.loop.schedule.noisy_init)},
              {"oracle", detector_json(cfg.loop.schedule.oracle)}}}}},
          {"evaluate", {{"score_floor", cfg.score_floor}}},
          {"render", {{"layers", cfg.layers}, {"image", cfg.image}}}};
}

void merge_json(RunConfig& cfg, const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  read(j, "seed", cfg.seed, "config");
  read(j, "out", cfg.out_dir, "config");
  read(j, "profile", cfg.profile, "config");

  if (j.contains("inputs")) {
    const json& in = j["inputs"];
    read(in, "input", cfg.inputs.input, "inputs");
    read(in, "targets", cfg.inputs.targets, "inputs");
    read(in, "detections", cfg.inputs.detections, "inputs");
    read(in, "ground_truth", cfg.inputs.ground_truth, "inputs");
    read(in, "predictions", cfg.inputs.predictions, "inputs");
    read(in, "annotations", cfg.inputs.annotations, "inputs");
    read(in, "points_csv", cfg.inputs.points_csv, "inputs");
    read(in, "point_side", cfg.inputs.point_side, "inputs");
  }

  if (j.contains("noise")) {
    const json& n = j["noise"];
    read(n, "box_noise", cfg.noise.box_noise, "noise");
    read_sparsity(n, cfg.noise.sparsity);
    if (n.contains("superfluous")) {
      if (n["superfluous"].is_null()) {
        cfg.noise.superfluous.reset();
      } else {
        SuperfluousParams s = cfg.noise.superfluous.value_or(SuperfluousParams{});
        const json& sj = n["superfluous"];
        read(sj, "trials", s.trials, "noise.superfluous");
        read(sj, "success", s.success, "noise.superfluous");
        read(sj, "min_side", s.min_side, "noise.superfluous");
        read(sj, "max_side", s.max_side, "noise.superfluous");
        cfg.noise.superfluous = s;
      }
    }
  }

  if (j.contains("correction")) {
    const json& c = j["correction"];
    CorrectionConfig& cc = cfg.correction;
    if (c.contains("distance")) {
      std::string name;
      read(c, "distance", name, "correction");
      cc.distance = parse_distance(name);
    }
    read(c, "center_norm", cc.center_norm, "correction");
    read(c, "distance_limit", cc.distance_limit, "correction");
    read(c, "temperature", cc.temperature, "correction");
    read(c, "mining_threshold", cc.mining_threshold, "correction");
    read(c, "mining_nms_iou", cc.mining_nms_iou, "correction");
    read(c, "dedup_iou", cc.dedup_iou, "correction");
    read(c, "max_iterations", cc.max_iterations, "correction");
    read(c, "convergence_eps", cc.convergence_eps, "correction");
    read(c, "fixed_size", cc.fixed_size, "correction");
  }

  if (j.contains("loop")) {
    const json& l = j["loop"];
    read(l, "iterations", cfg.loop.iterations, "loop");
    read(l, "keep_rate", cfg.loop.keep_rate, "loop");
    read(l, "correction_enabled", cfg.loop.correction_enabled, "loop");
    read(l, "render", cfg.loop.render, "loop");
    if (l.contains("scenario")) {
      const json& s = l["scenario"];
      auto& sc = cfg.loop.scenario;
      read(s, "images", sc.images, "loop.scenario");
      read(s, "min_objects", sc.min_objects, "loop.scenario");
      read(s, "max_objects", sc.max_objects, "loop.scenario");
      read(s, "width", sc.width, "loop.scenario");
      read(s, "height", sc.height, "loop.scenario");
      read(s, "min_side", sc.min_side, "loop.scenario");
      read(s, "max_side", sc.max_side, "loop.scenario");
      read(s, "class_count", sc.class_count, "loop.scenario");
    }
    if (l.contains("schedule")) {
      const json& s = l["schedule"];
      if (s.contains("noisy_init")) read_detector(s["noisy_init"], cfg.loop.schedule.noisy_init, "loop.schedule.noisy_init");
      if (s.contains("oracle")) read_detector(s["oracle"], cfg.loop.schedule.oracle, "loop.schedule.oracle");
    }
  }

  if (j.contains("evaluate")) read(j["evaluate"], "score_floor", cfg.score_floor, "evaluate");
  if (j.contains("render")) {
    read(j["render"], "layers", cfg.layers, "render");
    read(j["render"], "image", cfg.image, "render");
  }
}

}  // namespace boxrefine
