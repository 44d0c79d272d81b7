#include "boxrefine/cli.hpp"

#include "boxrefine/coco_io.hpp"
#include "boxrefine/config.hpp"
#include "boxrefine/errors.hpp"
#include "boxrefine/evaluation.hpp"
#include "boxrefine/parallel.hpp"
#include "boxrefine/svg.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <set>

namespace boxrefine {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Values given explicitly on the command line; applied last.
struct Flags {
  std::string config;
  std::optional<std::string> profile;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned workers = 1;

  std::optional<std::string> input, targets, detections, gt, predictions, annotations, points_csv;
  std::optional<double> point_side;

  std::optional<double> box_noise;
  std::optional<std::string> sparsity;
  std::optional<int> superfluous_trials;
  std::optional<double> superfluous_success, superfluous_min, superfluous_max;

  std::optional<std::string> distance;
  std::optional<double> distance_limit, temperature, tau, fixed_size, center_norm;
  std::optional<int> max_iterations;
  bool no_box_correction = false;
  bool no_mining = false;

  std::optional<int> iterations, images;
  std::optional<double> keep_rate;
  bool no_correction = false;
  bool render = false;

  std::optional<double> score_floor;
  std::optional<std::string> layers, image;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--profile", f.profile, "named hyperparameter profile");
  cmd->add_option("--seed", f.seed, "64-bit RNG seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "per-image worker threads")->check(CLI::PositiveNumber);
}

void add_correction(CLI::App* cmd, Flags& f) {
  cmd->add_option("--distance", f.distance, "iou, giou or center");
  cmd->add_option("--distance-limit,-d", f.distance_limit, "distance limit to the original target");
  cmd->add_option("--temperature", f.temperature, "softmax temperature");
  cmd->add_option("--tau", f.tau, "mining probability threshold");
  cmd->add_option("--fixed-size", f.fixed_size, "fixed square side (center-distance variant)");
  cmd->add_option("--center-norm", f.center_norm, "normalizer for the center distance");
  cmd->add_option("--max-iterations", f.max_iterations, "iteration cap for box correction");
  cmd->add_flag("--no-box-correction", f.no_box_correction, "disable box correction");
  cmd->add_flag("--no-mining", f.no_mining, "disable label mining");
}

void add_noise(CLI::App* cmd, Flags& f) {
  cmd->add_option("--nb", f.box_noise, "box noise level (fraction of box size)");
  cmd->add_option("--ns", f.sparsity, "sparsity: fraction, percentage or 'ex'");
  cmd->add_option("--superfluous-n", f.superfluous_trials, "binomial trials for superfluous boxes");
  cmd->add_option("--superfluous-p", f.superfluous_success, "binomial success probability");
  cmd->add_option("--superfluous-min", f.superfluous_min, "minimum superfluous box side");
  cmd->add_option("--superfluous-max", f.superfluous_max, "maximum superfluous box side");
}

template <typename T>
void set_if(const std::optional<T>& v, T& target) {
  if (v) target = *v;
}

RunConfig resolve(const std::string& command, const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) merge_json(cfg, nlohmann::json::parse(read_text_file(f.config)));
  if (f.profile) apply_profile(cfg, find_profile(*f.profile));
  cfg.command = command;

  set_if(f.seed, cfg.seed);
  set_if(f.out, cfg.out_dir);
  set_if(f.input, cfg.inputs.input);
  set_if(f.targets, cfg.inputs.targets);
  set_if(f.detections, cfg.inputs.detections);
  set_if(f.gt, cfg.inputs.ground_truth);
  set_if(f.predictions, cfg.inputs.predictions);
  set_if(f.annotations, cfg.inputs.annotations);
  set_if(f.points_csv, cfg.inputs.points_csv);
  set_if(f.point_side, cfg.inputs.point_side);

  set_if(f.box_noise, cfg.noise.box_noise);
  if (f.sparsity) cfg.noise.sparsity = parse_sparsity(*f.sparsity);
  if (f.superfluous_trials || f.superfluous_success || f.superfluous_min || f.superfluous_max) {
    SuperfluousParams s = cfg.noise.superfluous.value_or(SuperfluousParams{});
    set_if(f.superfluous_trials, s.trials);
    set_if(f.superfluous_success, s.success);
    set_if(f.superfluous_min, s.min_side);
    set_if(f.superfluous_max, s.max_side);
    cfg.noise.superfluous = s;
  }

  auto& c = cfg.correction;
  if (f.distance) c.distance = parse_distance(*f.distance);
  if (f.distance_limit) c.distance_limit = *f.distance_limit;
  set_if(f.temperature, c.temperature);
  if (f.tau) c.mining_threshold = *f.tau;
  if (f.fixed_size) c.fixed_size = *f.fixed_size;
  set_if(f.center_norm, c.center_norm);
  set_if(f.max_iterations, c.max_iterations);
  if (f.no_box_correction) c.distance_limit.reset();
  if (f.no_mining) c.mining_threshold.reset();

  set_if(f.iterations, cfg.loop.iterations);
  set_if(f.images, cfg.loop.scenario.images);
  set_if(f.keep_rate, cfg.loop.keep_rate);
  if (f.no_correction) cfg.loop.correction_enabled = false;
  if (f.render) cfg.loop.render = true;

  set_if(f.score_floor, cfg.score_floor);
  set_if(f.layers, cfg.layers);
  set_if(f.image, cfg.image);

  cfg.noise.seed = cfg.seed;
  return cfg;
}

void require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing required input: ") + what);
}

void check_image_ids(const Dataset& reference, const Dataset& other, const std::string& what) {
  std::string missing;
  for (const auto& img : other.images) {
    if (!reference.find(img.id)) missing += " " + img.id;
  }
  if (!missing.empty()) throw ValidationError(what + " image ids not found in reference:" + missing);
}

std::string file_stem_for(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

Dataset load_targets(const RunConfig& cfg, const std::string& coco_path) {
  Dataset ds = load_annotations(coco_path, AnnotationFormat::kCocoJson);
  if (!cfg.inputs.points_csv.empty()) {
    const auto points = parse_point_csv(read_text_file(cfg.inputs.points_csv));
    const auto boxes = points_to_boxes(points, cfg.inputs.point_side, ds);
    for (std::size_t i = 0; i < points.size(); ++i) ds.find(points[i].image_id)->annotations.push_back(boxes[i]);
    for (const auto& p : points) {
      if (p.label > ds.class_count()) ds.class_names.resize(static_cast<std::size_t>(p.label));
    }
  }
  return ds;
}

void cmd_inject_noise(const RunConfig& cfg, unsigned workers) {
  require(cfg.inputs.input, "--input");
  const Dataset clean = load_targets(cfg, cfg.inputs.input);
  NoiseSummary summary;
  const Dataset noisy = apply_noise(clean, cfg.noise, workers, &summary);
  const fs::path out = cfg.out_dir;
  save_coco_json(noisy, out / "annotations.json");
  ordered_json meta = {{"seed", cfg.seed},
                       {"rng", std::string(Rng::kAlgorithm)},
                       {"noise", to_json(cfg.noise)},
                       {"images", clean.images.size()},
                       {"annotations_before", summary.annotations_before},
                       {"annotations_after", summary.annotations_after},
                       {"superfluous_added", summary.superfluous_added}};
  write_text_file(out / "metadata.json", meta.dump(2) + "\n");
}

void cmd_correct(const RunConfig& cfg, unsigned workers) {
  require(cfg.inputs.targets, "--targets");
  if (cfg.inputs.detections.empty()) throw ConfigError("missing detections file (--detections)");
  if (!fs::exists(cfg.inputs.detections)) throw Error("detections file not found: " + cfg.inputs.detections);
  cfg.correction.validate();

  Dataset targets = load_targets(cfg, cfg.inputs.targets);
  const Dataset detections = load_annotations(cfg.inputs.detections, AnnotationFormat::kCocoJson);
  check_image_ids(targets, detections, "detections");

  std::vector<CorrectionReport> reports(targets.images.size());
  parallel_for(targets.images.size(), workers, [&](std::size_t i) {
    ImageRecord& img = targets.images[i];
    const ImageRecord* det = detections.find(img.id);
    const std::vector<Detection> none;
    const auto& preds = det && det->detections ? *det->detections : none;
    std::tie(img.annotations, reports[i]) = correct_targets(img.annotations, preds, cfg.correction);
    img.detections.reset();
  });

  ordered_json per_image = ordered_json::array();
  std::size_t corrected = 0, mined = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    ordered_json r = {{"image_id", targets.images[i].id}};
    r.update(to_json(reports[i]));
    per_image.push_back(r);
    corrected += reports[i].corrected_count;
    mined += reports[i].mined_count;
  }
  ordered_json report = {{"images", per_image},
                         {"total_corrected", corrected},
                         {"total_mined", mined},
                         {"correction", to_json(cfg.correction)}};
  const fs::path out = cfg.out_dir;
  save_coco_json(targets, out / "corrected.json");
  write_text_file(out / "report.json", report.dump(2) + "\n");
}

void cmd_evaluate(const RunConfig& cfg) {
  require(cfg.inputs.ground_truth, "--gt");
  if (cfg.inputs.predictions.empty() && cfg.inputs.annotations.empty()) {
    throw ConfigError("evaluate needs --predictions and/or --annotations");
  }
  const Dataset gt = load_annotations(cfg.inputs.ground_truth, AnnotationFormat::kCocoJson);
  ordered_json metrics = ordered_json::object();
  std::string csv = "class_id,class_name,ap50,gt,tp,fp,fn\n";

  if (!cfg.inputs.predictions.empty()) {
    const Dataset preds = load_annotations(cfg.inputs.predictions, AnnotationFormat::kCocoJson);
    check_image_ids(gt, preds, "predictions");
    const EvalResult r = evaluate_ap50(gt, preds);
    ordered_json per_class = ordered_json::array();
    for (const auto& [label, counts] : r.counts) {
      const auto ap = r.ap.find(label);
      const std::string name =
          label >= 1 && label <= gt.class_count() ? gt.class_names[static_cast<std::size_t>(label - 1)] : "";
      per_class.push_back({{"class_id", label},
                           {"name", name},
                           {"ap50", ap != r.ap.end() ? ordered_json(ap->second) : ordered_json(nullptr)},
                           {"gt", counts.gt},
                           {"tp", counts.tp},
                           {"fp", counts.fp},
                           {"fn", counts.fn}});
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.10f", ap != r.ap.end() ? ap->second : 0.0);
      csv += std::to_string(label) + "," + name + "," + (ap != r.ap.end() ? buf : "") + "," +
             std::to_string(counts.gt) + "," + std::to_string(counts.tp) + "," + std::to_string(counts.fp) + "," +
             std::to_string(counts.fn) + "\n";
    }
    metrics["ap50"] = {{"map", r.map}, {"classes", per_class}};

    const ErrorBreakdown e = error_breakdown(gt, preds, cfg.score_floor);
    metrics["errors"] = {{"score_floor", cfg.score_floor},
                         {"true_positive", e.true_positive},
                         {"localization", e.localization},
                         {"duplicate", e.duplicate},
                         {"background", e.background},
                         {"classification", e.classification},
                         {"both", e.both},
                         {"missed", e.missed},
                         {"total_gt", e.total_gt}};
  }
  if (!cfg.inputs.annotations.empty()) {
    const Dataset anns = load_annotations(cfg.inputs.annotations, AnnotationFormat::kCocoJson);
    check_image_ids(gt, anns, "annotations");
    const QualityStats q = quality_stats(gt, anns);
    metrics["quality"] = {{"gt_to_annotations", q.gt_to_annotations},
                          {"annotations_to_gt", q.annotations_to_gt},
                          {"gt_count", q.gt_count},
                          {"annotation_count", q.annotation_count},
                          {"gt_to_annotations_defined", q.gt_to_annotations_defined},
                          {"annotations_to_gt_defined", q.annotations_to_gt_defined}};
  }
  const fs::path out = cfg.out_dir;
  write_text_file(out / "metrics.json", metrics.dump(2) + "\n");
  if (!cfg.inputs.predictions.empty()) write_text_file(out / "per_class_ap.csv", csv);
}

void cmd_simulate(const RunConfig& cfg, unsigned workers) {
  const LoopConfig lc = cfg.loop_config();
  lc.validate();
  const Scenario scenario = make_scenario(lc.scenario, lc.noise, workers);
  const fs::path out = cfg.out_dir;

  RenderHook hook;
  if (cfg.loop.render) {
    fs::create_directories(out / "render");
    std::set<std::string> wanted;
    if (!cfg.image.empty()) {
      wanted.insert(cfg.image);
    } else {
      for (std::size_t i = 0; i < std::min<std::size_t>(4, scenario.truth.images.size()); ++i) {
        wanted.insert(scenario.truth.images[i].id);
      }
    }
    hook = [&, wanted](int iteration, const ImageRecord& image, std::span<const Annotation> truth) {
      if (!wanted.contains(image.id)) return;
      char name[32];
      std::snprintf(name, sizeof name, "iter%03d_", iteration);
      write_text_file(out / "render" / (name + file_stem_for(image.id) + ".svg"),
                      render_svg(image, parse_layers(cfg.layers), truth));
    };
  }
  const auto trace = run_loop(scenario, lc, workers, hook);
  std::string lines;
  for (const auto& rec : trace) lines += to_json_line(rec) + "\n";
  write_text_file(out / "trace.jsonl", lines);
}

void cmd_render(const RunConfig& cfg) {
  require(cfg.inputs.input, "--input");
  const Dataset ds = load_annotations(cfg.inputs.input, AnnotationFormat::kCocoJson);
  Dataset gt;
  if (!cfg.inputs.ground_truth.empty()) gt = load_annotations(cfg.inputs.ground_truth, AnnotationFormat::kCocoJson);
  const LayerSet layers = parse_layers(cfg.layers);
  if (!cfg.image.empty() && !ds.find(cfg.image)) throw ValidationError("image id not found: " + cfg.image);
  for (const auto& img : ds.images) {
    if (!cfg.image.empty() && img.id != cfg.image) continue;
    const ImageRecord* g = gt.find(img.id);
    const std::vector<Annotation> none;
    write_text_file(fs::path(cfg.out_dir) / (file_stem_for(img.id) + ".svg"),
                    render_svg(img, layers, g ? g->annotations : none));
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Refine noisy and incomplete bounding-box annotations with detector predictions"};
  app.require_subcommand(1);
  Flags f;

  auto* inject = app.add_subcommand("inject-noise", "corrupt clean annotations with synthetic noise");
  add_common(inject, f);
  add_noise(inject, f);
  inject->add_option("--input", f.input, "clean COCO-style annotations");
  inject->add_option("--points-csv", f.points_csv, "point labels added as fixed-size boxes");
  inject->add_option("--point-side", f.point_side, "side of boxes built from points");

  auto* correct = app.add_subcommand("correct", "correct targets with detections");
  add_common(correct, f);
  add_correction(correct, f);
  correct->add_option("--targets", f.targets, "noisy targets (COCO-style)");
  correct->add_option("--detections", f.detections, "scored detections (COCO-style results)");
  correct->add_option("--points-csv", f.points_csv, "point labels added as fixed-size boxes");
  correct->add_option("--point-side", f.point_side, "side of boxes built from points");

  auto* evaluate = app.add_subcommand("evaluate", "AP50, annotation quality and error breakdown");
  add_common(evaluate, f);
  evaluate->add_option("--gt", f.gt, "ground truth (COCO-style)");
  evaluate->add_option("--predictions", f.predictions, "scored predictions");
  evaluate->add_option("--annotations", f.annotations, "annotation set for quality statistics");
  evaluate->add_option("--score-floor", f.score_floor, "ignore predictions below this score in the error breakdown");

  auto* simulate = app.add_subcommand("simulate", "run the simulated teacher-student loop");
  add_common(simulate, f);
  add_noise(simulate, f);
  add_correction(simulate, f);
  simulate->add_option("--iterations", f.iterations, "loop iterations");
  simulate->add_option("--images", f.images, "scenario image count");
  simulate->add_option("--keep-rate", f.keep_rate, "EMA keep rate");
  simulate->add_flag("--no-correction", f.no_correction, "pass targets through unchanged");
  simulate->add_flag("--render", f.render, "write per-iteration SVGs");
  simulate->add_option("--layers", f.layers, "layers for rendered SVGs");
  simulate->add_option("--image", f.image, "render only this image id");

  auto* render = app.add_subcommand("render", "draw annotation layers as SVG");
  add_common(render, f);
  render->add_option("--input", f.input, "COCO-style annotations and detections");
  render->add_option("--gt", f.gt, "ground truth layer");
  render->add_option("--layers", f.layers, "comma-separated: original,corrected,mined,detections,ground-truth");
  render->add_option("--image", f.image, "render only this image id");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = resolve(command, f);
    fs::create_directories(cfg.out_dir);
    write_text_file(fs::path(cfg.out_dir) / "config.json", to_json(cfg).dump(2) + "\n");

    if (command == "inject-noise") {
      cmd_inject_noise(cfg, f.workers);
    } else if (command == "correct") {
      cmd_correct(cfg, f.workers);
    } else if (command == "evaluate") {
      cmd_evaluate(cfg);
    } else if (command == "simulate") {
      cmd_simulate(cfg, f.workers);
    } else if (command == "render") {
      cmd_render(cfg);
    }
  } catch (const nlohmann::json::exception& e) {
    err << "error: invalid config: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace boxrefine
