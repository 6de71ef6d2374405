#ifndef AEROCOOP_CONFIG_H_
#define AEROCOOP_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aerocoop/cdca.h"
#include "aerocoop/depthcrf.h"
#include "aerocoop/detector.h"
#include "aerocoop/metrics.h"
#include "aerocoop/scenesim.h"

namespace aerocoop {

struct DepthRange {
  double d_min = 1.0;
  double d_max = 171.0;
  int k = 170;
};

struct Toggles {
  bool use_cdo = true;
  bool use_cdca = true;
  std::vector<std::string> agents = {"vehicle", "uav_r", "uav_l"};
};

struct RunConfig {
  uint64_t seed = 42;
  int num_scenes = 100;
  int jobs = 1;
  std::string rig = "standard";
  SceneConfig scene;  // scene.extent mirrors grid
  NoiseConfig noise;
  DepthRange ground_depth{1.0, 171.0, 170};
  DepthRange aerial_depth{100.0, 220.0, 120};
  CrfParams crf;
  AttentionConfig fusion;
  BevGrid grid;
  HeadConfig head;
  double score_threshold = 0.3;
  MetricsConfig metrics;
  Toggles toggles;
  std::string out_dir = "out";

  const DepthRange& depth_for(Domain d) const {
    return d == Domain::kGround ? ground_depth : aerial_depth;
  }
};

struct ConfigError {
  std::string path;     // dotted field path, empty for syntax errors
  std::string message;
  int line = 0;         // 1-based; 0 when not applicable
  int column = 0;
};

struct ConfigResult {
  std::optional<RunConfig> config;
  std::vector<ConfigError> errors;

  bool ok() const { return errors.empty(); }
};

// Parses a JSON document on top of the defaults. Collects every violation;
// config is empty whenever errors is not.
ConfigResult validate_config(std::string_view text);

// Checks the semantic constraints of an assembled config.
std::vector<ConfigError> check_config(const RunConfig& cfg);

// Every effective value, as JSON text, for echoing into reports.
std::string config_to_json(const RunConfig& cfg);

std::string format_error(const ConfigError& e);

size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace aerocoop

#endif  // AEROCOOP_CONFIG_H_
