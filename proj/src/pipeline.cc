#include "aerocoop/pipeline.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "aerocoop/bevlift.h"
#include "aerocoop/cdca.h"
#include "aerocoop/depthcrf.h"

namespace aerocoop {
namespace {

int rig_index(const Scene& scene, const std::string& name) {
  for (size_t i = 0; i < scene.cameras.size(); ++i) {
    if (scene.cameras[i].name == name) return static_cast<int>(i);
  }
  throw std::out_of_range("unknown agent '" + name + "'");
}

// Agents of a variant in rig order.
std::vector<int> selected_agents(const Scene& scene, const Variant& v) {
  std::vector<int> idx;
  for (const auto& name : v.agents) idx.push_back(rig_index(scene, name));
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  if (idx.empty()) throw std::invalid_argument("variant selects no agent");
  return idx;
}

class SceneCache {
 public:
  SceneCache(const RunConfig& cfg, const Scene& scene,
             std::vector<AgentFrame> frames, std::vector<DepthBins> bins)
      : cfg_(cfg), scene_(scene), frames_(std::move(frames)), bins_(std::move(bins)) {}

  std::vector<Box3D> detect(const Variant& v) {
    const std::vector<int> agents = selected_agents(scene_, v);
    std::vector<BevFeature> maps;
    for (int a : agents) maps.push_back(bev(agents, a, v.use_cdo));
    BevFeature fused;
    if (maps.size() == 1) {
      fused = std::move(maps[0]);
    } else if (!v.use_cdca) {
      fused = mean_fuse(maps);
    } else {
      fused = cdca_fold(agents, maps, v.lambda);
    }
    return decode(center_head(fused, cfg_.head), cfg_.grid, cfg_.score_threshold);
  }

 private:
  // Pairwise fold: the aerial maps fuse among themselves first, then the
  // ground map fuses with the result.
  BevFeature cdca_fold(const std::vector<int>& agents,
                       const std::vector<BevFeature>& maps, double lambda) {
    std::vector<const BevFeature*> ground, aerial;
    for (size_t i = 0; i < agents.size(); ++i) {
      (scene_.cameras[agents[i]].domain == Domain::kGround ? ground : aerial)
          .push_back(&maps[i]);
    }
    AttentionConfig inner = cfg_.fusion;
    inner.lambda = 0.5;
    auto fold = [&](const std::vector<const BevFeature*>& list) {
      BevFeature acc = *list.back();
      for (int i = static_cast<int>(list.size()) - 2; i >= 0; --i) {
        acc = fuse(*list[i], acc, inner);
      }
      return acc;
    };
    if (ground.empty()) return fold(aerial);
    if (aerial.empty()) return fold(ground);
    AttentionConfig outer = cfg_.fusion;
    outer.lambda = lambda;
    return fuse(fold(ground), fold(aerial), outer);
  }

  // BEV of `agent` when `agents` are refined jointly. Depth distributions
  // are large, so only the lifted maps are kept.
  const BevFeature& bev(const std::vector<int>& agents, int agent, bool cdo) {
    const bool refine = cdo && cfg_.crf.iterations > 0;
    const std::string key = bev_key(agents, agent, refine);
    auto it = bev_.find(key);
    if (it != bev_.end()) return it->second;
    if (!refine) return bev_.emplace(key, lift(agent, unary(agent))).first->second;
    std::vector<const AgentFrame*> frames;
    std::vector<DepthBins> bins;
    std::vector<DepthDistribution> initial;
    for (int a : agents) {
      frames.push_back(&frames_[a]);
      bins.push_back(bins_[a]);
      initial.push_back(unary(a));
    }
    Correspondence corr;
    for (size_t i = 0; i < agents.size(); ++i) {
      for (size_t j = 0; j < agents.size(); ++j) {
        if (i == j) continue;
        corr.append(cross_domain_correspondence(
            *frames[i], *frames[j], scene_.cameras[agents[i]].camera,
            scene_.cameras[agents[j]].camera, initial[i], static_cast<int>(i),
            static_cast<int>(j)));
      }
    }
    const auto refined = mean_field_refine(std::span<const AgentFrame* const>(frames),
                                           corr, cfg_.crf, bins, std::move(initial));
    for (size_t i = 0; i < agents.size(); ++i) {
      bev_.emplace(bev_key(agents, agents[i], true), lift(agents[i], refined[i]));
    }
    return bev_.at(key);
  }

  const DepthDistribution& unary(int agent) {
    auto it = unary_.find(agent);
    if (it == unary_.end()) {
      const AgentFrame* f = &frames_[agent];
      auto d = unary_distributions(std::span<const AgentFrame* const>(&f, 1),
                                   std::span<const DepthBins>(&bins_[agent], 1));
      it = unary_.emplace(agent, std::move(d[0])).first;
    }
    return it->second;
  }

  BevFeature lift(int agent, const DepthDistribution& d) const {
    return lift_splat(frames_[agent], d, scene_.cameras[agent].camera, cfg_.grid);
  }

  static std::string bev_key(const std::vector<int>& agents, int agent, bool refine) {
    // Without refinement an agent's map does not depend on the selection.
    std::string s = refine ? "crf" : "unary";
    if (refine) {
      for (int a : agents) s += "," + std::to_string(a);
    }
    return s + "|" + std::to_string(agent);
  }

  const RunConfig& cfg_;
  const Scene& scene_;
  std::vector<AgentFrame> frames_;
  std::vector<DepthBins> bins_;
  std::map<std::string, BevFeature> bev_;
  std::map<int, DepthDistribution> unary_;
};

Box3D box_of(const SceneObject& o) {
  Box3D b;
  b.center = o.center;
  b.size = o.size;
  b.yaw = o.yaw;
  b.velocity = o.velocity;
  b.label = o.label;
  b.score = 1.0;
  return b;
}

}  // namespace

Variant variant_of(const RunConfig& cfg, std::string label) {
  return {std::move(label), cfg.toggles.agents, cfg.toggles.use_cdo,
          cfg.toggles.use_cdca, cfg.fusion.lambda};
}

uint64_t scene_seed(const RunConfig& cfg, int index) {
  return derive_seed(cfg.seed, static_cast<uint64_t>(index) + 1);
}

Scene make_scene(const RunConfig& cfg, int index) {
  SceneConfig sc = cfg.scene;
  sc.extent = cfg.grid;
  Scene s = generate_scene(sc, scene_seed(cfg, index));
  s.timestamp = 0.1 * index;
  return s;
}

std::vector<Box3D> ground_truth_boxes(const Scene& scene,
                                      std::span<const AgentFrame> frames) {
  std::vector<char> seen(scene.objects.size(), 0);
  for (const auto& f : frames) {
    for (int idx : f.object_index.values()) {
      if (idx >= 0) seen[idx] = 1;
    }
  }
  std::vector<Box3D> out;
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    if (seen[i]) out.push_back(box_of(scene.objects[i]));
  }
  return out;
}

SceneOutput process_scene(const RunConfig& cfg, int index,
                          std::span<const Variant> variants) {
  const Scene scene = make_scene(cfg, index);
  std::vector<AgentFrame> frames;
  std::vector<DepthBins> bins;
  for (size_t a = 0; a < scene.cameras.size(); ++a) {
    const DepthRange& r = cfg.depth_for(scene.cameras[a].domain);
    bins.push_back(make_depth_bins(r.d_min, r.d_max, r.k));
    frames.push_back(render_agent_frame(scene, scene.cameras[a].name,
                                        bins.back().centers, cfg.noise,
                                        derive_seed(scene.seed, 100 + a)));
  }
  SceneOutput out;
  out.index = index;
  out.seed = scene.seed;
  out.timestamp = scene.timestamp;
  out.gts = ground_truth_boxes(scene, frames);
  SceneCache cache(cfg, scene, std::move(frames), std::move(bins));
  for (const auto& v : variants) out.detections.push_back(cache.detect(v));
  return out;
}

BatchResult run_variants(const RunConfig& cfg, std::span<const Variant> variants,
                         const Progress& progress) {
  if (cfg.num_scenes < 0) throw std::invalid_argument("num_scenes must be >= 0");
  BatchResult result;
  result.scenes.resize(cfg.num_scenes);
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  std::mutex mu;
  std::exception_ptr failure;
  int failed_index = -1;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= cfg.num_scenes) return;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure) return;
      }
      try {
        result.scenes[i] = process_scene(cfg, i, variants);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure || i < failed_index) {
          failure = std::current_exception();
          failed_index = i;
        }
        return;
      }
      const int n = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard<std::mutex> lock(mu);
        progress(n, cfg.num_scenes);
      }
    }
  };
  const int jobs = std::max(1, std::min(cfg.jobs, std::max(1, cfg.num_scenes)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw std::runtime_error("scene " + std::to_string(failed_index) + ": " +
                               e.what());
    }
  }
  for (size_t v = 0; v < variants.size(); ++v) {
    std::vector<SceneBoxes> boxes;
    for (const auto& s : result.scenes) boxes.push_back({s.detections[v], s.gts});
    result.variants.push_back({variants[v], evaluate(boxes, cfg.metrics)});
  }
  return result;
}

BatchResult run(const RunConfig& cfg, const Progress& progress) {
  const Variant v = variant_of(cfg);
  return run_variants(cfg, std::span<const Variant>(&v, 1), progress);
}

std::vector<Variant> ablation_variants(const RunConfig& cfg,
                                       std::span<const std::string> axes) {
  if (axes.empty()) throw std::invalid_argument("ablate: no axes given");
  std::vector<Variant> rows = {variant_of(cfg, "")};
  for (const auto& axis : axes) {
    std::vector<Variant> next;
    for (const auto& base : rows) {
      auto tag = [&](const std::string& t) {
        return base.label.empty() ? t : base.label + " " + t;
      };
      if (axis == "agents") {
        const std::vector<std::pair<std::string, std::vector<std::string>>> sets = {
            {"vehicle", {"vehicle"}},
            {"uav", {"uav_r", "uav_l"}},
            {"vehicle+uav", {"vehicle", "uav_r", "uav_l"}}};
        for (const auto& [name, agents] : sets) {
          Variant v = base;
          v.agents = agents;
          v.label = tag("agents=" + name);
          next.push_back(v);
        }
      } else if (axis == "use_cdo" || axis == "use_cdca") {
        for (bool on : {false, true}) {
          Variant v = base;
          (axis == "use_cdo" ? v.use_cdo : v.use_cdca) = on;
          v.label = tag(axis == "use_cdo" ? (on ? "CDO+" : "CDO-")
                                          : (on ? "CDCA+" : "CDCA-"));
          next.push_back(v);
        }
      } else if (axis == "lambda") {
        for (double l : {0.0, 0.5, 1.0}) {
          Variant v = base;
          v.lambda = l;
          std::ostringstream s;
          s << "lambda=" << l;
          v.label = tag(s.str());
          next.push_back(v);
        }
      } else {
        throw std::invalid_argument("ablate: unknown axis '" + axis +
                                    "' (expected agents, use_cdo, use_cdca, lambda)");
      }
    }
    rows = std::move(next);
  }
  return rows;
}

AblationReport ablate(const RunConfig& cfg, std::span<const std::string> axes,
                      const Progress& progress) {
  const auto variants = ablation_variants(cfg, axes);
  AblationReport rep;
  rep.batch = run_variants(cfg, variants, progress);
  const double base = rep.batch.variants.front().report.map;
  for (const auto& vr : rep.batch.variants) {
    rep.rows.push_back({vr.variant.label, vr.report, vr.report.map - base});
  }
  return rep;
}

std::string ablation_csv(const AblationReport& report) {
  std::ostringstream out;
  out << "label,mAP,mATE,mASE,mAOE,mAVE,mAAE,NDS,delta_mAP\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& r : report.rows) {
    std::string label = r.label;
    if (label.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : label) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      label = quoted + "\"";
    }
    const auto& m = r.report;
    out << label << "," << m.map << "," << m.mtp.ate << "," << m.mtp.ase << ","
        << m.mtp.aoe << "," << m.mtp.ave << "," << m.mtp.aae << "," << m.nds << ","
        << r.delta_map << "\n";
  }
  return out.str();
}

}  // namespace aerocoop
