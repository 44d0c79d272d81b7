#pragma once

#include "boxrefine/correction.hpp"
#include "boxrefine/noise.hpp"
#include "boxrefine/simloop.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace boxrefine {

/// Fully resolved run configuration, serialized into every output directory.
///
/// Resolution order, later wins: built-in defaults, the --config file, the
/// --profile flag, individual flags. A "profile" key inside a config file is
/// informational only, so re-running from a written config reproduces it.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  std::optional<std::string> profile;
  std::string out_dir = "out";

  struct Inputs {
    std::string input;        // inject-noise, render
    std::string targets;      // correct
    std::string detections;   // correct
    std::string ground_truth; // evaluate, render
    std::string predictions;  // evaluate
    std::string annotations;  // evaluate
    std::string points_csv;   // correct, inject-noise
    double point_side = 60.0;
  } inputs;

  NoiseConfig noise;
  CorrectionConfig correction;

  struct Loop {
    int iterations = 20;
    double keep_rate = 0.9;
    bool correction_enabled = true;
    ScenarioConfig scenario;
    ImprovementSchedule schedule;
    bool render = false;
  } loop;

  double score_floor = 0.05;
  std::string layers = "all";
  std::string image;  // render: single image id, empty for all

  LoopConfig loop_config() const;
};

/// Named correction hyperparameter profiles (plus the matching noise setting).
struct Profile {
  std::string name;
  std::optional<double> distance_limit;
  std::optional<double> mining_threshold;
  std::optional<double> fixed_size;
  std::optional<double> keep_rate;
  std::optional<double> box_noise;
  std::optional<Sparsity> sparsity;
};

const std::vector<Profile>& builtin_profiles();
/// Throws ConfigError for unknown names.
const Profile& find_profile(const std::string& name);
void apply_profile(RunConfig& cfg, const Profile& profile);

nlohmann::ordered_json to_json(const RunConfig& cfg);
/// Overlays the keys present in `j` onto `cfg`. Throws ConfigError.
void merge_json(RunConfig& cfg, const nlohmann::json& j);

nlohmann::ordered_json to_json(const CorrectionConfig& cfg);
nlohmann::ordered_json to_json(const NoiseConfig& cfg);
nlohmann::ordered_json to_json(const CorrectionReport& report);

std::string distance_name(DistanceKind kind);
DistanceKind parse_distance(const std::string& name);
/// "ex"/"extreme" or a fraction in [0, 1] (a trailing '%' divides by 100).
Sparsity parse_sparsity(const std::string& text);

}  // namespace boxrefine
