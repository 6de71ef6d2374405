#ifndef AEROCOOP_SCENE_IO_H_
#define AEROCOOP_SCENE_IO_H_

#include <string>
#include <vector>

#include "aerocoop/config.h"
#include "aerocoop/detector.h"
#include "aerocoop/metrics.h"
#include "aerocoop/scenesim.h"

namespace aerocoop {

inline constexpr int kFileVersion = 1;

// Thrown for malformed or wrong-version documents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

// Detections of one scene under one variant, with the scene's ground truth
// and seed echoed so a file can be evaluated on its own.
struct DetectionFile {
  int scene_id = 0;
  uint64_t seed = 0;
  std::string label;
  std::vector<Box3D> boxes;
  std::vector<Box3D> gts;
};

std::string detections_to_json(const DetectionFile& d);
DetectionFile detections_from_json(const std::string& text);

// metrics.json: mAP, mATE, mASE, mAOE, mAVE, mAAE, NDS plus per-class AP
// and, when given, the effective config.
std::string metrics_to_json(const MetricsReport& report,
                            const RunConfig* cfg = nullptr);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace aerocoop

#endif  // AEROCOOP_SCENE_IO_H_
