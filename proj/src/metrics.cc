#include "aerocoop/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace aerocoop {
namespace {

std::vector<int> ranked_predictions(std::span<const Box3D> preds,
                                    ObjectClass cls) {
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(preds.size()); ++i) {
    if (preds[i].label == cls) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return preds[a].score > preds[b].score;
  });
  return order;
}

int count_class(std::span<const Box3D> boxes, ObjectClass cls) {
  return static_cast<int>(std::count_if(boxes.begin(), boxes.end(),
                                        [cls](const Box3D& b) { return b.label == cls; }));
}

struct RankedHit {
  double score;
  int scene;
  int pred;
  bool tp;
};

// Every prediction of `cls` with its TP flag, ranked across scenes by
// descending score (ties by scene, then prediction index).
std::vector<RankedHit> ranked_hits(std::span<const SceneBoxes> scenes,
                                   ObjectClass cls, double d) {
  std::vector<RankedHit> hits;
  for (int s = 0; s < static_cast<int>(scenes.size()); ++s) {
    const MatchResult m = match(scenes[s].preds, scenes[s].gts, cls, d);
    std::vector<char> tp(scenes[s].preds.size(), 0);
    for (const auto& [p, g] : m.matches) tp[p] = 1;
    for (int i = 0; i < static_cast<int>(scenes[s].preds.size()); ++i) {
      if (scenes[s].preds[i].label != cls) continue;
      hits.push_back({scenes[s].preds[i].score, s, i, tp[i] != 0});
    }
  }
  std::stable_sort(hits.begin(), hits.end(), [](const RankedHit& a, const RankedHit& b) {
    return a.score > b.score;
  });
  return hits;
}

}  // namespace

void MetricsConfig::validate() const {
  if (dist_thresholds.empty()) {
    throw std::invalid_argument("metrics.dist_thresholds must not be empty");
  }
  for (size_t i = 0; i < dist_thresholds.size(); ++i) {
    if (!(dist_thresholds[i] > 0.0) ||
        (i > 0 && !(dist_thresholds[i] > dist_thresholds[i - 1]))) {
      throw std::invalid_argument(
          "metrics.dist_thresholds must be positive and ascending");
    }
  }
  if (std::find(dist_thresholds.begin(), dist_thresholds.end(), tp_threshold) ==
      dist_thresholds.end()) {
    throw std::invalid_argument("metrics.tp_threshold must be one of dist_thresholds");
  }
  if (recall_points < 2) throw std::invalid_argument("metrics.recall_points must be >= 2");
  if (min_recall < 0.0 || min_recall >= 1.0 || min_precision < 0.0 ||
      min_precision >= 1.0) {
    throw std::invalid_argument("metrics recall/precision floors must lie in [0,1)");
  }
}

double bev_distance(const Box3D& a, const Box3D& b) {
  return std::hypot(a.center.x() - b.center.x(), a.center.y() - b.center.y());
}

MatchResult match(std::span<const Box3D> preds, std::span<const Box3D> gts,
                  ObjectClass cls, double d) {
  MatchResult out;
  std::vector<char> taken(gts.size(), 0);
  for (int p : ranked_predictions(preds, cls)) {
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
      if (taken[g] || gts[g].label != cls) continue;
      const double dist = bev_distance(preds[p], gts[g]);
      if (dist < best_dist) {
        best_dist = dist;
        best = g;
      }
    }
    if (best >= 0 && best_dist < d) {
      taken[best] = 1;
      out.matches.emplace_back(p, best);
      out.distances.push_back(best_dist);
    } else {
      out.unmatched_preds.push_back(p);
    }
  }
  for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
    if (!taken[g] && gts[g].label == cls) out.unmatched_gts.push_back(g);
  }
  return out;
}

std::vector<double> interpolate_precision(std::span<const double> recall,
                                          std::span<const double> precision,
                                          int points) {
  std::vector<double> out(points, 0.0);
  if (recall.empty()) return out;
  for (int i = 0; i < points; ++i) {
    const double x = static_cast<double>(i) / (points - 1);
    if (x < recall.front()) {
      out[i] = precision.front();
    } else if (x > recall.back()) {
      out[i] = 0.0;
    } else if (x == recall.back()) {
      out[i] = precision.back();
    } else {
      // Last j with recall[j] <= x; then recall[j + 1] > x.
      const size_t j =
          std::upper_bound(recall.begin(), recall.end(), x) - recall.begin() - 1;
      const double t = (x - recall[j]) / (recall[j + 1] - recall[j]);
      out[i] = precision[j] + t * (precision[j + 1] - precision[j]);
    }
  }
  return out;
}

std::optional<double> average_precision(std::span<const SceneBoxes> scenes,
                                        ObjectClass cls, double d,
                                        const MetricsConfig& cfg) {
  int npos = 0;
  for (const auto& s : scenes) npos += count_class(s.gts, cls);
  if (npos == 0) return std::nullopt;
  const auto hits = ranked_hits(scenes, cls, d);
  if (hits.empty()) return 0.0;
  std::vector<double> recall, precision;
  int tp = 0;
  int fp = 0;
  for (const auto& h : hits) {
    (h.tp ? tp : fp) += 1;
    recall.push_back(static_cast<double>(tp) / npos);
    precision.push_back(static_cast<double>(tp) / (tp + fp));
  }
  const auto prec = interpolate_precision(recall, precision, cfg.recall_points);
  const int first =
      static_cast<int>(std::lround(cfg.min_recall * (cfg.recall_points - 1))) + 1;
  double sum = 0.0;
  int count = 0;
  for (int i = first; i < cfg.recall_points; ++i) {
    sum += std::max(0.0, prec[i] - cfg.min_precision);
    ++count;
  }
  if (count == 0) return 0.0;
  return sum / count / (1.0 - cfg.min_precision);
}

std::optional<double> average_precision(std::span<const Box3D> preds,
                                        std::span<const Box3D> gts,
                                        ObjectClass cls, double d,
                                        const MetricsConfig& cfg) {
  const SceneBoxes scene{{preds.begin(), preds.end()}, {gts.begin(), gts.end()}};
  return average_precision(std::span<const SceneBoxes>(&scene, 1), cls, d, cfg);
}

double map_score(const ApTable& table) {
  if (table.empty()) throw std::invalid_argument("map_score: empty AP table");
  double sum = 0.0;
  for (const auto& [key, ap] : table) sum += ap;
  return sum / table.size();
}

double aligned_iou(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double inter = a.cwiseMin(b).prod();
  return inter / (a.prod() + b.prod() - inter);
}

double yaw_difference(double a, double b) {
  return std::abs(wrap_angle(a - b));
}

TpErrors tp_errors(std::span<const SceneBoxes> scenes, ObjectClass cls,
                   const MetricsConfig& cfg) {
  double ate = 0.0, ase = 0.0, aoe = 0.0, ave = 0.0;
  int n = 0;
  for (const auto& s : scenes) {
    const MatchResult m = match(s.preds, s.gts, cls, cfg.tp_threshold);
    for (size_t i = 0; i < m.matches.size(); ++i) {
      const Box3D& p = s.preds[m.matches[i].first];
      const Box3D& g = s.gts[m.matches[i].second];
      ate += m.distances[i];
      ase += 1.0 - aligned_iou(p.size, g.size);
      aoe += yaw_difference(p.yaw, g.yaw);
      ave += (p.velocity - g.velocity).norm();
      ++n;
    }
  }
  if (n == 0) return TpErrors{};
  return {ate / n, ase / n, aoe / n, ave / n, 0.0};
}

double nds(double map, const TpErrors& mtp) {
  double sum = 5.0 * map;
  for (double e : mtp.as_array()) sum += 1.0 - std::clamp(e, 0.0, 1.0);
  return sum / 10.0;
}

MetricsReport evaluate(std::span<const SceneBoxes> scenes,
                       const MetricsConfig& cfg) {
  cfg.validate();
  MetricsReport r;
  std::array<double, 5> tp_sum{};
  int defined = 0;
  for (ObjectClass cls : kAllClasses) {
    bool has_gt = false;
    for (int t = 0; t < static_cast<int>(cfg.dist_thresholds.size()); ++t) {
      const auto ap = average_precision(scenes, cls, cfg.dist_thresholds[t], cfg);
      if (!ap) break;
      has_gt = true;
      r.ap[{cls, t}] = *ap;
    }
    if (!has_gt) {
      r.undefined_classes.push_back(cls);
      continue;
    }
    const auto e = tp_errors(scenes, cls, cfg).as_array();
    for (int i = 0; i < 5; ++i) tp_sum[i] += e[i];
    ++defined;
  }
  if (defined == 0) {
    r.map = 0.0;
    r.mtp = TpErrors{};
  } else {
    r.map = map_score(r.ap);
    r.mtp = {tp_sum[0] / defined, tp_sum[1] / defined, tp_sum[2] / defined,
             tp_sum[3] / defined, tp_sum[4] / defined};
  }
  r.nds = nds(r.map, r.mtp);
  return r;
}

double smooth_l1(double x, double beta) {
  const double a = std::abs(x);
  return a < beta ? 0.5 * a * a / beta : a - 0.5 * beta;
}

int direction_bin(double yaw) { return std::sin(yaw) >= 0.0 ? 0 : 1; }

LossTerms total_loss(const LossInputs& in, const LossWeights& w) {
  if (w.bbox < 0.0 || w.cls < 0.0 || w.dir < 0.0) {
    throw std::invalid_argument("total_loss: weights must be >= 0");
  }
  if (!in.heatmap_pred.same_shape(in.heatmap_target)) {
    throw std::invalid_argument("total_loss: heatmap shapes differ");
  }
  if (in.pred_boxes.size() != in.target_boxes.size()) {
    throw std::invalid_argument("total_loss: box lists differ in length");
  }
  if (!in.dir_logits.empty() && in.dir_logits.size() != in.pred_boxes.size()) {
    throw std::invalid_argument("total_loss: one direction logit pair per box");
  }
  LossTerms t;
  for (size_t i = 0; i < in.pred_boxes.size(); ++i) {
    const Box3D& p = in.pred_boxes[i];
    const Box3D& g = in.target_boxes[i];
    const std::array<double, 9> res = {
        p.center.x() - g.center.x(),
        p.center.y() - g.center.y(),
        p.center.z() - g.center.z(),
        std::log(p.size.x() / g.size.x()),
        std::log(p.size.y() / g.size.y()),
        std::log(p.size.z() / g.size.z()),
        std::sin(p.yaw - g.yaw),
        p.velocity.x() - g.velocity.x(),
        p.velocity.y() - g.velocity.y()};
    for (double r : res) t.bbox += smooth_l1(r);
  }
  if (!in.pred_boxes.empty()) t.bbox /= in.pred_boxes.size();

  const auto pred = in.heatmap_pred.data();
  const auto target = in.heatmap_target.data();
  int positives = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    if (!(p > 0.0 && p < 1.0)) {
      std::ostringstream msg;
      msg << "total_loss: heatmap prediction " << p << " outside (0,1)";
      throw std::invalid_argument(msg.str());
    }
    if (target[i] == 1.0) {
      t.cls -= std::pow(1.0 - p, 2.0) * std::log(p);
      ++positives;
    } else {
      t.cls -= std::pow(1.0 - target[i], 4.0) * p * p * std::log(1.0 - p);
    }
  }
  t.cls /= std::max(1, positives);

  for (size_t i = 0; i < in.dir_logits.size(); ++i) {
    const auto& l = in.dir_logits[i];
    const double mx = std::max(l[0], l[1]);
    const double lse = mx + std::log(std::exp(l[0] - mx) + std::exp(l[1] - mx));
    t.dir += lse - l[direction_bin(in.target_boxes[i].yaw)];
  }
  if (!in.dir_logits.empty()) t.dir /= in.dir_logits.size();

  t.total = w.bbox * t.bbox + w.cls * t.cls + w.dir * t.dir;
  return t;
}

}  // namespace aerocoop
