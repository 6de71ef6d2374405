#include "aerocoop/scene_io.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace aerocoop {
namespace {

using nlohmann::json;

json vec(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json mat(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Vector2d vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatError("expected a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

Eigen::Matrix3d mat3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3x3 matrix");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec3(j[r]).transpose();
  return m;
}

ObjectClass label_of(const json& j) {
  const auto c = parse_class(j.get<std::string>());
  if (!c) throw FormatError("unknown class '" + j.get<std::string>() + "'");
  return *c;
}

json box_json(const Box3D& b) {
  return {{"label", class_name(b.label)},
          {"center", vec(b.center)},
          {"size", vec(b.size)},
          {"yaw", b.yaw},
          {"velocity", vec(b.velocity)},
          {"score", b.score}};
}

Box3D box_from(const json& j) {
  Box3D b;
  b.label = label_of(j.at("label"));
  b.center = vec3(j.at("center"));
  b.size = vec3(j.at("size"));
  b.yaw = j.at("yaw").get<double>();
  b.velocity = vec2(j.at("velocity"));
  b.score = j.value("score", 1.0);
  return b;
}

json parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(e.what());
  }
  if (!j.is_object()) throw FormatError("expected a JSON object");
  const auto it = j.find("version");
  const int v = it != j.end() && it->is_number_integer() ? it->get<int>() : -1;
  if (v != kFileVersion) {
    throw FormatError("unsupported version " + std::to_string(v));
  }
  return j;
}

// nlohmann type errors surface as FormatError.
template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(e.what());
  }
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
  json cams = json::array();
  for (const auto& c : scene.cameras) {
    cams.push_back({{"name", c.name},
                    {"domain", domain_name(c.domain)},
                    {"intrinsics", mat(c.camera.intrinsics)},
                    {"rotation", mat(c.camera.rotation)},
                    {"translation", vec(c.camera.translation)},
                    {"image_width", c.camera.image_width},
                    {"image_height", c.camera.image_height},
                    {"fov_deg", c.camera.fov_deg}});
  }
  json objs = json::array();
  for (const auto& o : scene.objects) {
    objs.push_back({{"id", o.id},
                    {"label", class_name(o.label)},
                    {"center", vec(o.center)},
                    {"size", vec(o.size)},
                    {"yaw", o.yaw},
                    {"velocity", vec(o.velocity)}});
  }
  json j = {{"version", kFileVersion},
            {"seed", scene.seed},
            {"timestamp", scene.timestamp},
            {"cameras", cams},
            {"objects", objs}};
  return j.dump(2);
}

Scene scene_from_json(const std::string& text) {
  const json j = parse(text);
  return guarded([&] {
    Scene s;
    s.seed = j.at("seed").get<uint64_t>();
    s.timestamp = j.value("timestamp", 0.0);
    for (const auto& c : j.at("cameras")) {
      AgentCamera a;
      a.name = c.at("name").get<std::string>();
      const auto dom = c.at("domain").get<std::string>();
      if (dom == domain_name(Domain::kGround)) {
        a.domain = Domain::kGround;
      } else if (dom == domain_name(Domain::kAerial)) {
        a.domain = Domain::kAerial;
      } else {
        throw FormatError("unknown domain '" + dom + "'");
      }
      try {
        a.camera = camera_from_parts(mat3(c.at("intrinsics")), mat3(c.at("rotation")),
                                     vec3(c.at("translation")), c.at("image_width").get<int>(),
                                     c.at("image_height").get<int>(),
                                     c.at("fov_deg").get<double>());
      } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("camera ") + a.name + ": " + e.what());
      }
      s.cameras.push_back(std::move(a));
    }
    for (const auto& o : j.at("objects")) {
      SceneObject obj;
      obj.id = o.at("id").get<int>();
      obj.label = label_of(o.at("label"));
      obj.center = vec3(o.at("center"));
      obj.size = vec3(o.at("size"));
      obj.yaw = o.at("yaw").get<double>();
      obj.velocity = vec2(o.at("velocity"));
      s.objects.push_back(obj);
    }
    return s;
  });
}

std::string detections_to_json(const DetectionFile& d) {
  json boxes = json::array();
  for (const auto& b : d.boxes) boxes.push_back(box_json(b));
  json gts = json::array();
  for (const auto& b : d.gts) gts.push_back(box_json(b));
  json j = {{"version", kFileVersion},
            {"scene_id", d.scene_id},
            {"seed", d.seed},
            {"label", d.label},
            {"boxes", boxes},
            {"gts", gts}};
  return j.dump(2);
}

DetectionFile detections_from_json(const std::string& text) {
  const json j = parse(text);
  return guarded([&] {
    DetectionFile d;
    d.scene_id = j.at("scene_id").get<int>();
    d.seed = j.value("seed", uint64_t{0});
    d.label = j.value("label", std::string());
    for (const auto& b : j.at("boxes")) d.boxes.push_back(box_from(b));
    if (j.contains("gts")) {
      for (const auto& b : j.at("gts")) d.gts.push_back(box_from(b));
    }
    return d;
  });
}

std::string metrics_to_json(const MetricsReport& r, const RunConfig* cfg) {
  json ap = json::object();
  for (const auto& [key, value] : r.ap) {
    const std::string cls(class_name(key.first));
    if (!ap.contains(cls)) ap[cls] = json::object();
    const double d = cfg ? cfg->metrics.dist_thresholds.at(key.second)
                         : MetricsConfig{}.dist_thresholds.at(key.second);
    std::ostringstream name;
    name << d;
    ap[cls][name.str()] = value;
  }
  json undefined = json::array();
  for (auto c : r.undefined_classes) undefined.push_back(class_name(c));
  json j = {{"mAP", r.map},
            {"mATE", r.mtp.ate},
            {"mASE", r.mtp.ase},
            {"mAOE", r.mtp.aoe},
            {"mAVE", r.mtp.ave},
            {"mAAE", r.mtp.aae},
            {"NDS", r.nds},
            {"ap", ap},
            {"undefined_classes", undefined}};
  if (cfg) j["config"] = json::parse(config_to_json(*cfg));
  return j.dump(2);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace aerocoop
