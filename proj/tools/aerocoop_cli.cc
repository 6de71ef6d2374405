// aerocoop: simulate | run | eval | ablate

#include <malloc.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aerocoop/config.h"
#include "aerocoop/pipeline.h"
#include "aerocoop/scene_io.h"

namespace fs = std::filesystem;
using namespace aerocoop;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct ConfigFailure {};

struct Options {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> scenes;
  std::optional<int> jobs;
  std::vector<std::string> axes;
  std::string dets;
  bool quiet = false;
};

RunConfig load_config(const Options& o) {
  std::string text;
  if (!o.config_path.empty()) {
    try {
      text = read_file(o.config_path);
    } catch (const std::exception& e) {
      std::cerr << "config: " << e.what() << "\n";
      throw ConfigFailure{};
    }
  }
  ConfigResult r = validate_config(text);
  if (r.ok()) {
    RunConfig& c = *r.config;
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.out_dir = *o.out;
    if (o.scenes) c.num_scenes = *o.scenes;
    if (o.jobs) c.jobs = *o.jobs;
    r.errors = check_config(c);
  }
  if (!r.ok()) {
    const std::string where = o.config_path.empty() ? "<defaults>" : o.config_path;
    for (const auto& e : r.errors) std::cerr << where << ": " << format_error(e) << "\n";
    throw ConfigFailure{};
  }
  return *r.config;
}

std::string scene_file(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04d.json", index);
  return buf;
}

// Labels like "uav_r+uav_l/cdo=1" as directory names.
std::string slug(const std::string& label) {
  std::string s = label;
  for (char& ch : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' ||
                    ch == '_' || ch == '.' || ch == '=' || ch == '+';
    if (!ok) ch = '_';
  }
  return s;
}

Progress progress_for(const Options& o) {
  if (o.quiet) return {};
  return [](int done, int total) {
    std::cerr << "\rscenes " << done << "/" << total << std::flush;
    if (done == total) std::cerr << "\n";
  };
}

void write_detections(const fs::path& dir, const BatchResult& batch, size_t variant) {
  fs::create_directories(dir);
  for (const auto& s : batch.scenes) {
    DetectionFile d;
    d.scene_id = s.index;
    d.seed = s.seed;
    d.label = batch.variants[variant].variant.label;
    d.boxes = s.detections[variant];
    d.gts = s.gts;
    write_file((dir / scene_file(s.index)).string(), detections_to_json(d));
  }
}

void print_summary(const std::string& label, const MetricsReport& r) {
  std::printf("%-24s mAP %.4f  mATE %.4f  mASE %.4f  mAOE %.4f  mAVE %.4f  mAAE %.4f  NDS %.4f\n",
              label.c_str(), r.map, r.mtp.ate, r.mtp.ase, r.mtp.aoe, r.mtp.ave, r.mtp.aae,
              r.nds);
}

int cmd_simulate(const Options& o) {
  const RunConfig cfg = load_config(o);
  const fs::path dir = fs::path(cfg.out_dir) / "scenes";
  fs::create_directories(dir);
  for (int i = 0; i < cfg.num_scenes; ++i) {
    const Scene s = make_scene(cfg, i);
    write_file((dir / scene_file(i)).string(), scene_to_json(s));
  }
  write_file((fs::path(cfg.out_dir) / "config.json").string(), config_to_json(cfg));
  std::printf("wrote %d scenes to %s\n", cfg.num_scenes, dir.string().c_str());
  return 0;
}

int cmd_run(const Options& o) {
  const RunConfig cfg = load_config(o);
  const BatchResult batch = run(cfg, progress_for(o));
  const fs::path out(cfg.out_dir);
  write_detections(out / "detections", batch, 0);
  const MetricsReport& report = batch.variants[0].report;
  write_file((out / "metrics.json").string(), metrics_to_json(report, &cfg));
  print_summary(batch.variants[0].variant.label, report);
  return 0;
}

int cmd_eval(const Options& o) {
  const RunConfig cfg = load_config(o);
  const fs::path dir = o.dets.empty() ? fs::path(cfg.out_dir) / "detections" : fs::path(o.dets);
  if (!fs::is_directory(dir)) throw std::runtime_error("no such directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no detection files in " + dir.string());
  std::vector<SceneBoxes> scenes;
  for (const auto& f : files) {
    DetectionFile d;
    try {
      d = detections_from_json(read_file(f.string()));
    } catch (const FormatError& e) {
      throw std::runtime_error(f.string() + ": " + e.what());
    }
    scenes.push_back({std::move(d.boxes), std::move(d.gts)});
  }
  const MetricsReport report = evaluate(scenes, cfg.metrics);
  const fs::path out = o.dets.empty() ? fs::path(cfg.out_dir) : dir.parent_path();
  write_file((out / "metrics.json").string(), metrics_to_json(report, &cfg));
  print_summary(dir.filename().string(), report);
  return 0;
}

int cmd_ablate(const Options& o) {
  const RunConfig cfg = load_config(o);
  AblationReport report;
  try {
    report = ablate(cfg, o.axes, progress_for(o));
  } catch (const std::invalid_argument& e) {
    std::cerr << "axes: " << e.what() << "\n";
    return kConfigError;
  }
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  write_file((out / "ablation.csv").string(), ablation_csv(report));
  for (size_t v = 0; v < report.batch.variants.size(); ++v) {
    write_detections(out / "ablation" / slug(report.rows[v].label), report.batch, v);
  }
  write_file((out / "config.json").string(), config_to_json(cfg));
  for (const auto& row : report.rows) {
    print_summary(row.label, row.report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Keeps large scratch buffers in the heap between scenes.
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Air-ground cooperative 3D detection on synthetic scenes"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file");
    sub->add_option("--seed", o.seed, "base seed (overrides the config)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--scenes", o.scenes, "number of scenes");
    sub->add_option("--jobs", o.jobs, "worker threads");
    sub->add_flag("--quiet", o.quiet, "no progress output");
  };
  auto* simulate = app.add_subcommand("simulate", "write scene files");
  auto* run = app.add_subcommand("run", "detect and evaluate");
  auto* eval = app.add_subcommand("eval", "evaluate stored detection files");
  auto* abl = app.add_subcommand("ablate", "sweep module toggles");
  for (auto* s : {simulate, run, eval, abl}) common(s);
  eval->add_option("--dets", o.dets, "directory of detection files");
  abl->add_option("--axes", o.axes, "agents, use_cdo, use_cdca, lambda")
      ->delimiter(',')
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*run) return cmd_run(o);
    if (*eval) return cmd_eval(o);
    return cmd_ablate(o);
  } catch (const ConfigFailure&) {
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
