#ifndef AEROCOOP_METRICS_H_
#define AEROCOOP_METRICS_H_

#include <array>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "aerocoop/detector.h"
#include "aerocoop/tensor.h"
#include "aerocoop/types.h"

namespace aerocoop {

struct MetricsConfig {
  std::vector<double> dist_thresholds = {0.5, 1.0, 2.0, 4.0};
  double tp_threshold = 2.0;
  int recall_points = 101;
  double min_recall = 0.1;
  double min_precision = 0.1;

  // Thresholds positive and ascending, tp_threshold among them.
  void validate() const;
};

// Predictions and ground truth of one scene.
struct SceneBoxes {
  std::vector<Box3D> preds;
  std::vector<Box3D> gts;
};

struct MatchResult {
  // (prediction index, gt index) in the order they were made.
  std::vector<std::pair<int, int>> matches;
  std::vector<double> distances;
  std::vector<int> unmatched_preds;
  std::vector<int> unmatched_gts;
};

double bev_distance(const Box3D& a, const Box3D& b);

// Greedy over predictions of `cls` by descending score (equal scores keep
// index order); each takes the nearest unmatched same-class GT closer than
// d. Equidistant GTs resolve to the lower index.
MatchResult match(std::span<const Box3D> preds, std::span<const Box3D> gts,
                  ObjectClass cls, double d);

// Area under the interpolated precision/recall curve with the 0.1 recall
// and precision floors, normalised by 0.9. Predictions of all scenes are
// ranked jointly; matching stays inside each scene. std::nullopt when no
// scene holds a GT of `cls`.
std::optional<double> average_precision(std::span<const SceneBoxes> scenes,
                                        ObjectClass cls, double d,
                                        const MetricsConfig& cfg = {});
std::optional<double> average_precision(std::span<const Box3D> preds,
                                        std::span<const Box3D> gts,
                                        ObjectClass cls, double d,
                                        const MetricsConfig& cfg = {});

// Precision at each recall grid point as np.interp(grid, recall, precision,
// right=0) evaluates it.
std::vector<double> interpolate_precision(std::span<const double> recall,
                                          std::span<const double> precision,
                                          int points);

// (class, threshold index) -> AP; undefined entries are absent.
using ApTable = std::map<std::pair<ObjectClass, int>, double>;

// Mean over the defined entries. Throws std::invalid_argument when empty.
double map_score(const ApTable& table);

struct TpErrors {
  double ate = 1.0;
  double ase = 1.0;
  double aoe = 1.0;
  double ave = 1.0;
  double aae = 1.0;

  std::array<double, 5> as_array() const { return {ate, ase, aoe, ave, aae}; }
};

double aligned_iou(const Eigen::Vector3d& size_a, const Eigen::Vector3d& size_b);
double yaw_difference(double a, double b);  // in [0, pi]

// Mean errors over the matches of `cls` at cfg.tp_threshold; all ones when
// there is no match. AAE is 0 whenever a match exists.
TpErrors tp_errors(std::span<const SceneBoxes> scenes, ObjectClass cls,
                   const MetricsConfig& cfg = {});

// (5 mAP + sum(1 - min(1, max(0, mTP)))) / 10.
double nds(double map, const TpErrors& mtp);

struct MetricsReport {
  ApTable ap;
  std::vector<ObjectClass> undefined_classes;  // no GT anywhere
  double map = 0.0;
  TpErrors mtp;  // unclamped class means
  double nds = 0.0;
};

MetricsReport evaluate(std::span<const SceneBoxes> scenes,
                       const MetricsConfig& cfg = {});

struct LossWeights {
  double bbox = 1.0;
  double cls = 1.0;
  double dir = 1.0;
};

struct LossInputs {
  Tensor3 heatmap_pred;    // n_x x n_y x classes, values in (0, 1)
  Tensor3 heatmap_target;  // from bev_gt_heatmap
  // Matched pairs; pred_boxes[i] regresses target_boxes[i].
  std::vector<Box3D> pred_boxes;
  std::vector<Box3D> target_boxes;
  // Two-bin direction logits per matched prediction.
  std::vector<std::array<double, 2>> dir_logits;
};

struct LossTerms {
  double bbox = 0.0;
  double cls = 0.0;
  double dir = 0.0;
  double total = 0.0;
};

double smooth_l1(double x, double beta = 1.0);

// Direction bin of a yaw: 0 for sin(yaw) >= 0, else 1.
int direction_bin(double yaw);

// Weighted sum of the smooth-L1 box term, the Gaussian focal heatmap term
// (alpha 2, beta 4, normalised by the number of unit targets) and the
// direction cross-entropy. Throws std::invalid_argument for heatmap
// predictions outside (0, 1) or mismatched inputs.
LossTerms total_loss(const LossInputs& in, const LossWeights& w = {});

}  // namespace aerocoop

#endif  // AEROCOOP_METRICS_H_
