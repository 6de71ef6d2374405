#include "aerocoop/config.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace aerocoop {
namespace {

using nlohmann::json;

const char* type_name(const json& j) {
  if (j.is_null()) return "null";
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  return "object";
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

class Reader {
 public:
  using Handler = std::function<void(const json&, const std::string&)>;
  using Fields = std::vector<std::pair<std::string, Handler>>;

  std::vector<ConfigError> errors;

  void error(const std::string& path, std::string message) {
    errors.push_back({path, std::move(message), 0, 0});
  }

  void object(const json& j, const std::string& path, const Fields& fields) {
    if (!j.is_object()) {
      error(path, std::string("expected object, got ") + type_name(j));
      return;
    }
    for (const auto& [key, value] : j.items()) {
      auto it = std::find_if(fields.begin(), fields.end(),
                             [&](const auto& f) { return f.first == key; });
      if (it != fields.end()) {
        it->second(value, join(path, key));
        continue;
      }
      std::string best;
      size_t best_d = std::numeric_limits<size_t>::max();
      for (const auto& f : fields) {
        const size_t d = edit_distance(key, f.first);
        if (d < best_d) {
          best_d = d;
          best = f.first;
        }
      }
      std::string msg = "unknown key '" + key + "'";
      if (!best.empty()) msg += "; did you mean '" + best + "'?";
      error(join(path, key), msg);
    }
  }

  Handler real(double& dst) {
    return [this, &dst](const json& j, const std::string& p) {
      if (!j.is_number()) return error(p, std::string("expected number, got ") + type_name(j));
      dst = j.get<double>();
    };
  }

  Handler integer(int& dst) {
    return [this, &dst](const json& j, const std::string& p) {
      if (!j.is_number_integer()) {
        return error(p, std::string("expected integer, got ") + type_name(j));
      }
      const auto v = j.get<int64_t>();
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        return error(p, "integer out of range");
      }
      dst = static_cast<int>(v);
    };
  }

  Handler unsigned64(uint64_t& dst) {
    return [this, &dst](const json& j, const std::string& p) {
      if (j.is_number_unsigned()) {
        dst = j.get<uint64_t>();
      } else if (j.is_number_integer()) {
        error(p, "must be >= 0");
      } else {
        error(p, std::string("expected integer, got ") + type_name(j));
      }
    };
  }

  Handler flag(bool& dst) {
    return [this, &dst](const json& j, const std::string& p) {
      if (!j.is_boolean()) return error(p, std::string("expected boolean, got ") + type_name(j));
      dst = j.get<bool>();
    };
  }

  Handler text(std::string& dst) {
    return [this, &dst](const json& j, const std::string& p) {
      if (!j.is_string()) return error(p, std::string("expected string, got ") + type_name(j));
      dst = j.get<std::string>();
    };
  }

  template <typename E>
  Handler choice(E& dst, std::vector<std::pair<std::string, E>> names) {
    return [this, &dst, names = std::move(names)](const json& j, const std::string& p) {
      if (!j.is_string()) return error(p, std::string("expected string, got ") + type_name(j));
      const auto s = j.get<std::string>();
      std::string allowed;
      for (const auto& [n, v] : names) {
        if (n == s) {
          dst = v;
          return;
        }
        allowed += (allowed.empty() ? "" : ", ") + n;
      }
      error(p, "unknown value '" + s + "' (expected one of " + allowed + ")");
    };
  }

  Handler reals(std::vector<double>& dst) {
    return [this, &dst](const json& j, const std::string& p) {
      if (!j.is_array()) return error(p, std::string("expected array, got ") + type_name(j));
      std::vector<double> out;
      for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
          error(p + "[" + std::to_string(i) + "]", "expected number");
          return;
        }
        out.push_back(j[i].get<double>());
      }
      dst = std::move(out);
    };
  }

  Handler texts(std::vector<std::string>& dst) {
    return [this, &dst](const json& j, const std::string& p) {
      if (!j.is_array()) return error(p, std::string("expected array, got ") + type_name(j));
      std::vector<std::string> out;
      for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_string()) {
          error(p + "[" + std::to_string(i) + "]", "expected string");
          return;
        }
        out.push_back(j[i].get<std::string>());
      }
      dst = std::move(out);
    };
  }
};

Reader::Fields depth_fields(Reader& r, DepthRange& d) {
  return {{"d_min", r.real(d.d_min)}, {"d_max", r.real(d.d_max)}, {"k", r.integer(d.k)}};
}

void read_config(Reader& r, const json& root, RunConfig& c) {
  auto& sc = c.scene;
  auto& w = sc.class_weights;
  const Reader::Fields weights = {{"car", r.real(w[0])},
                                  {"truck", r.real(w[1])},
                                  {"bus", r.real(w[2])},
                                  {"pedestrian", r.real(w[3])}};
  const Reader::Fields scene = {
      {"num_objects", r.integer(sc.num_objects)},
      {"occlusion_rate", r.real(sc.occlusion_rate)},
      {"class_weights", [&](const json& j, const std::string& p) { r.object(j, p, weights); }},
      {"min_gap_m", r.real(sc.min_gap_m)},
      {"edge_margin_m", r.real(sc.edge_margin_m)},
      {"max_retries", r.integer(sc.max_retries)},
  };
  const Reader::Fields noise = {{"depth_sigma", r.real(c.noise.depth_sigma)},
                                {"logit_sigma", r.real(c.noise.logit_sigma)},
                                {"feat_sigma", r.real(c.noise.feat_sigma)}};
  const Reader::Fields ground = depth_fields(r, c.ground_depth);
  const Reader::Fields aerial = depth_fields(r, c.aerial_depth);
  const Reader::Fields depth = {
      {"ground", [&](const json& j, const std::string& p) { r.object(j, p, ground); }},
      {"aerial", [&](const json& j, const std::string& p) { r.object(j, p, aerial); }},
  };
  const Reader::Fields crf = {
      {"theta", r.real(c.crf.theta)},
      {"w_intra", r.real(c.crf.w_intra)},
      {"w_cross", r.real(c.crf.w_cross)},
      {"neighborhood_radius", r.integer(c.crf.neighborhood_radius)},
      {"iterations", r.integer(c.crf.iterations)},
      {"mode", r.choice<CrfMode>(c.crf.mode, {{"neighborhood", CrfMode::kNeighborhood},
                                              {"exact", CrfMode::kExact}})},
  };
  const Reader::Fields fusion = {
      {"d_k", r.integer(c.fusion.d_k)},
      {"token_pool", r.integer(c.fusion.token_pool)},
      {"lambda", r.real(c.fusion.lambda)},
      {"scope", r.choice<AttentionScope>(c.fusion.scope,
                                         {{"per_location", AttentionScope::kPerLocation},
                                          {"global", AttentionScope::kGlobal}})},
      {"correlation", r.choice<CorrelationMode>(c.fusion.correlation,
                                                {{"cosine", CorrelationMode::kCosine},
                                                 {"literal", CorrelationMode::kLiteral}})},
      {"align_scales", r.flag(c.fusion.align_scales)},
      {"mask_empty", r.flag(c.fusion.mask_empty)},
  };
  const Reader::Fields grid = {{"x_min", r.real(c.grid.x_min)},
                               {"x_max", r.real(c.grid.x_max)},
                               {"y_min", r.real(c.grid.y_min)},
                               {"y_max", r.real(c.grid.y_max)},
                               {"cell_size", r.real(c.grid.cell_size)}};
  const Reader::Fields head = {{"vote_sigma_cells", r.real(c.head.vote_sigma_cells)},
                               {"score_scale", r.real(c.head.score_scale)},
                               {"window_radius", r.integer(c.head.window_radius)},
                               {"min_cell_mass", r.real(c.head.min_cell_mass)}};
  const Reader::Fields metrics = {{"dist_thresholds", r.reals(c.metrics.dist_thresholds)},
                                  {"tp_threshold", r.real(c.metrics.tp_threshold)},
                                  {"recall_points", r.integer(c.metrics.recall_points)},
                                  {"min_recall", r.real(c.metrics.min_recall)},
                                  {"min_precision", r.real(c.metrics.min_precision)}};
  const Reader::Fields toggles = {{"use_cdo", r.flag(c.toggles.use_cdo)},
                                  {"use_cdca", r.flag(c.toggles.use_cdca)},
                                  {"agents", r.texts(c.toggles.agents)}};
  auto nested = [&r](const Reader::Fields& f) {
    return [&r, &f](const json& j, const std::string& p) { r.object(j, p, f); };
  };
  const Reader::Fields top = {
      {"seed", r.unsigned64(c.seed)},
      {"num_scenes", r.integer(c.num_scenes)},
      {"jobs", r.integer(c.jobs)},
      {"rig", r.text(c.rig)},
      {"out_dir", r.text(c.out_dir)},
      {"score_threshold", r.real(c.score_threshold)},
      {"scene", nested(scene)},
      {"noise", nested(noise)},
      {"depth", nested(depth)},
      {"crf", nested(crf)},
      {"fusion", nested(fusion)},
      {"grid", nested(grid)},
      {"head", nested(head)},
      {"metrics", nested(metrics)},
      {"toggles", nested(toggles)},
  };
  r.object(root, "", top);
}

void check_depth(const DepthRange& d, const std::string& path,
                 std::vector<ConfigError>& out) {
  if (!(d.d_min >= 0.0)) out.push_back({path + ".d_min", "must be >= 0"});
  if (!(d.d_max > d.d_min)) out.push_back({path + ".d_max", "must be > d_min"});
  if (d.k < 2) out.push_back({path + ".k", "must be >= 2"});
}

std::pair<int, int> line_column(std::string_view text, size_t byte) {
  int line = 1;
  int column = 1;
  const size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace

size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<ConfigError> check_config(const RunConfig& c) {
  std::vector<ConfigError> out;
  auto need = [&out](bool ok, const char* path, const char* message) {
    if (!ok) out.push_back({path, message});
  };
  need(c.num_scenes >= 1, "num_scenes", "must be >= 1");
  need(c.jobs >= 1, "jobs", "must be >= 1");
  need(c.rig == "standard", "rig", "unknown rig (expected standard)");
  need(c.score_threshold >= 0.0 && c.score_threshold <= 1.0, "score_threshold",
       "must lie in [0,1]");

  const SceneConfig& s = c.scene;
  need(s.num_objects >= 0, "scene.num_objects", "must be >= 0");
  need(s.occlusion_rate >= 0.0 && s.occlusion_rate <= 1.0, "scene.occlusion_rate",
       "must lie in [0,1]");
  double wsum = 0.0;
  bool wneg = false;
  for (double w : s.class_weights) {
    wsum += w;
    wneg = wneg || !(w >= 0.0);
  }
  need(!wneg && wsum > 0.0, "scene.class_weights",
       "weights must be >= 0 with a positive sum");
  need(s.min_gap_m >= 0.0, "scene.min_gap_m", "must be >= 0");
  need(s.edge_margin_m >= 0.0, "scene.edge_margin_m", "must be >= 0");
  need(s.max_retries >= 1, "scene.max_retries", "must be >= 1");

  need(c.noise.depth_sigma >= 0.0, "noise.depth_sigma", "must be >= 0");
  need(c.noise.logit_sigma >= 0.0, "noise.logit_sigma", "must be >= 0");
  need(c.noise.feat_sigma >= 0.0, "noise.feat_sigma", "must be >= 0");
  check_depth(c.ground_depth, "depth.ground", out);
  check_depth(c.aerial_depth, "depth.aerial", out);

  need(c.crf.theta > 0.0, "crf.theta", "must be > 0");
  need(c.crf.w_intra >= 0.0, "crf.w_intra", "must be >= 0");
  need(c.crf.w_cross >= 0.0, "crf.w_cross", "must be >= 0");
  need(c.crf.neighborhood_radius >= 0, "crf.neighborhood_radius", "must be >= 0");
  need(c.crf.iterations >= 0, "crf.iterations", "must be >= 0");

  need(c.fusion.d_k >= 1, "fusion.d_k", "must be >= 1");
  need(c.fusion.token_pool >= 1, "fusion.token_pool", "must be >= 1");
  need(c.fusion.lambda >= 0.0 && c.fusion.lambda <= 1.0, "fusion.lambda",
       "must lie in the range [0,1]");

  need(c.grid.cell_size > 0.0, "grid.cell_size", "must be > 0");
  need(c.grid.x_max > c.grid.x_min, "grid.x_max", "must be > x_min");
  need(c.grid.y_max > c.grid.y_min, "grid.y_max", "must be > y_min");

  need(c.head.vote_sigma_cells > 0.0, "head.vote_sigma_cells", "must be > 0");
  need(c.head.score_scale > 0.0, "head.score_scale", "must be > 0");
  need(c.head.window_radius >= 0, "head.window_radius", "must be >= 0");
  need(c.head.min_cell_mass >= 0.0, "head.min_cell_mass", "must be >= 0");

  try {
    c.metrics.validate();
  } catch (const std::invalid_argument& e) {
    out.push_back({"metrics", e.what()});
  }

  const auto& agents = c.toggles.agents;
  need(!agents.empty(), "toggles.agents", "select at least one agent");
  const RigConfig rig = RigConfig::standard();
  for (size_t i = 0; i < agents.size(); ++i) {
    const std::string path = "toggles.agents[" + std::to_string(i) + "]";
    const bool known = std::any_of(rig.agents.begin(), rig.agents.end(),
                                   [&](const RigEntry& e) { return e.name == agents[i]; });
    if (!known) out.push_back({path, "unknown agent '" + agents[i] + "'"});
    if (std::find(agents.begin(), agents.begin() + i, agents[i]) != agents.begin() + i) {
      out.push_back({path, "duplicate agent '" + agents[i] + "'"});
    }
  }
  return out;
}

ConfigResult validate_config(std::string_view text) {
  ConfigResult result;
  RunConfig cfg;
  const bool blank = std::all_of(text.begin(), text.end(), [](char ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r';
  });
  if (!blank) {
    json root;
    try {
      root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
      const auto [line, column] = line_column(text, e.byte);
      std::string msg = e.what();
      if (auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
      result.errors.push_back({"", msg, line, column});
      return result;
    }
    Reader r;
    read_config(r, root, cfg);
    result.errors = std::move(r.errors);
  }
  if (cfg.grid.cell_size > 0.0 && cfg.grid.x_max > cfg.grid.x_min &&
      cfg.grid.y_max > cfg.grid.y_min) {
    cfg.grid.n_x = static_cast<int>(std::lround((cfg.grid.x_max - cfg.grid.x_min) /
                                                cfg.grid.cell_size));
    cfg.grid.n_y = static_cast<int>(std::lround((cfg.grid.y_max - cfg.grid.y_min) /
                                                cfg.grid.cell_size));
    if (cfg.grid.n_x < 1 || cfg.grid.n_y < 1) {
      result.errors.push_back({"grid.cell_size", "extent smaller than one cell"});
    }
  }
  cfg.scene.extent = cfg.grid;
  for (auto& e : check_config(cfg)) result.errors.push_back(std::move(e));
  if (result.errors.empty()) result.config = std::move(cfg);
  return result;
}

std::string config_to_json(const RunConfig& c) {
  auto depth = [](const DepthRange& d) {
    return json{{"d_min", d.d_min}, {"d_max", d.d_max}, {"k", d.k}};
  };
  const auto& w = c.scene.class_weights;
  json j = {
      {"seed", c.seed},
      {"num_scenes", c.num_scenes},
      {"jobs", c.jobs},
      {"rig", c.rig},
      {"out_dir", c.out_dir},
      {"score_threshold", c.score_threshold},
      {"scene",
       {{"num_objects", c.scene.num_objects},
        {"occlusion_rate", c.scene.occlusion_rate},
        {"class_weights", {{"car", w[0]}, {"truck", w[1]}, {"bus", w[2]}, {"pedestrian", w[3]}}},
        {"min_gap_m", c.scene.min_gap_m},
        {"edge_margin_m", c.scene.edge_margin_m},
        {"max_retries", c.scene.max_retries}}},
      {"noise",
       {{"depth_sigma", c.noise.depth_sigma},
        {"logit_sigma", c.noise.logit_sigma},
        {"feat_sigma", c.noise.feat_sigma}}},
      {"depth", {{"ground", depth(c.ground_depth)}, {"aerial", depth(c.aerial_depth)}}},
      {"crf",
       {{"theta", c.crf.theta},
        {"w_intra", c.crf.w_intra},
        {"w_cross", c.crf.w_cross},
        {"neighborhood_radius", c.crf.neighborhood_radius},
        {"iterations", c.crf.iterations},
        {"mode", c.crf.mode == CrfMode::kExact ? "exact" : "neighborhood"}}},
      {"fusion",
       {{"d_k", c.fusion.d_k},
        {"token_pool", c.fusion.token_pool},
        {"lambda", c.fusion.lambda},
        {"scope", c.fusion.scope == AttentionScope::kGlobal ? "global" : "per_location"},
        {"correlation",
         c.fusion.correlation == CorrelationMode::kLiteral ? "literal" : "cosine"},
        {"align_scales", c.fusion.align_scales},
        {"mask_empty", c.fusion.mask_empty}}},
      {"grid",
       {{"x_min", c.grid.x_min},
        {"x_max", c.grid.x_max},
        {"y_min", c.grid.y_min},
        {"y_max", c.grid.y_max},
        {"cell_size", c.grid.cell_size}}},
      {"head",
       {{"vote_sigma_cells", c.head.vote_sigma_cells},
        {"score_scale", c.head.score_scale},
        {"window_radius", c.head.window_radius},
        {"min_cell_mass", c.head.min_cell_mass}}},
      {"metrics",
       {{"dist_thresholds", c.metrics.dist_thresholds},
        {"tp_threshold", c.metrics.tp_threshold},
        {"recall_points", c.metrics.recall_points},
        {"min_recall", c.metrics.min_recall},
        {"min_precision", c.metrics.min_precision}}},
      {"toggles",
       {{"use_cdo", c.toggles.use_cdo},
        {"use_cdca", c.toggles.use_cdca},
        {"agents", c.toggles.agents}}},
  };
  return j.dump(2);
}

std::string format_error(const ConfigError& e) {
  std::ostringstream os;
  if (e.line > 0) os << "line " << e.line << ", column " << e.column << ": ";
  if (!e.path.empty()) os << e.path << ": ";
  os << e.message;
  return os.str();
}

}  // namespace aerocoop
