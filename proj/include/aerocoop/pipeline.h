#ifndef AEROCOOP_PIPELINE_H_
#define AEROCOOP_PIPELINE_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aerocoop/config.h"
#include "aerocoop/detector.h"
#include "aerocoop/metrics.h"

namespace aerocoop {

// One point on the module-toggle axes.
struct Variant {
  std::string label;
  std::vector<std::string> agents;
  bool use_cdo = true;
  bool use_cdca = true;
  double lambda = 0.5;
};

Variant variant_of(const RunConfig& cfg, std::string label = "run");

struct SceneOutput {
  int index = 0;
  uint64_t seed = 0;
  double timestamp = 0.0;
  std::vector<Box3D> gts;
  std::vector<std::vector<Box3D>> detections;  // one list per variant
};

uint64_t scene_seed(const RunConfig& cfg, int index);

Scene make_scene(const RunConfig& cfg, int index);

// Ground truth as boxes: objects with at least one visible pixel in any rig
// camera.
std::vector<Box3D> ground_truth_boxes(const Scene& scene,
                                      std::span<const AgentFrame> frames);

// Renders the rig once and evaluates every variant on the same frames.
SceneOutput process_scene(const RunConfig& cfg, int index,
                          std::span<const Variant> variants);

struct VariantResult {
  Variant variant;
  MetricsReport report;
};

struct BatchResult {
  std::vector<SceneOutput> scenes;
  std::vector<VariantResult> variants;
};

using Progress = std::function<void(int done, int total)>;

// Processes cfg.num_scenes scenes on cfg.jobs threads. Results are ordered
// by scene index regardless of scheduling. A failing scene aborts the batch
// with a std::runtime_error naming its index.
BatchResult run_variants(const RunConfig& cfg, std::span<const Variant> variants,
                         const Progress& progress = {});

// run_variants with the single variant described by cfg.toggles.
BatchResult run(const RunConfig& cfg, const Progress& progress = {});

struct AblationRow {
  std::string label;
  MetricsReport report;
  double delta_map = 0.0;  // against the first row
};

struct AblationReport {
  std::vector<AblationRow> rows;
  BatchResult batch;
};

// Axis values: agents -> vehicle | uav_r+uav_l | all three, use_cdo and
// use_cdca -> off | on, lambda -> 0 | 0.5 | 1. Rows follow the Cartesian
// product in the order the axes are given; unswept fields come from cfg.
std::vector<Variant> ablation_variants(const RunConfig& cfg,
                                       std::span<const std::string> axes);

// Throws std::invalid_argument for empty or unknown axes.
AblationReport ablate(const RunConfig& cfg, std::span<const std::string> axes,
                      const Progress& progress = {});

std::string ablation_csv(const AblationReport& report);

}  // namespace aerocoop

#endif  // AEROCOOP_PIPELINE_H_
