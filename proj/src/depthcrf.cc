#include "aerocoop/depthcrf.h"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <utility>

namespace aerocoop {
namespace {

constexpr double kProbFloor = 1e-12;
constexpr int kExactPixelCap = 64;

void softmax_row(std::span<const double> in, std::span<double> out) {
  if (std::adjacent_find(in.begin(), in.end(), std::not_equal_to<>()) == in.end()) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(in.size()));
    return;
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : in) mx = std::max(mx, x);
  double sum = 0.0;
  for (size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
}

struct CrfNode {
  int agent;
  int pixel;
};

// Per-agent visible pixel lists and the flat-pixel -> node map.
struct NodeIndex {
  std::vector<std::vector<int>> pixels;       // [agent][node] -> flat pixel
  std::vector<std::vector<int>> node_of;      // [agent][flat pixel] -> node or -1
  std::vector<size_t> base;                   // global id offset per agent

  explicit NodeIndex(std::span<const AgentFrame* const> frames) {
    size_t total = 0;
    for (const AgentFrame* fp : frames) {
      const AgentFrame& f = *fp;
      std::vector<int> px;
      std::vector<int> map(static_cast<size_t>(f.height) * f.width, -1);
      for (int r = 0; r < f.height; ++r) {
        for (int c = 0; c < f.width; ++c) {
          if (!f.visible(r, c)) continue;
          const int flat = r * f.width + c;
          map[flat] = static_cast<int>(px.size());
          px.push_back(flat);
        }
      }
      base.push_back(total);
      total += px.size();
      pixels.push_back(std::move(px));
      node_of.push_back(std::move(map));
    }
  }
};

std::span<const double> feature_at(const AgentFrame& f, int flat) {
  return f.features.row(flat / f.width, flat % f.width);
}

std::vector<const AgentFrame*> refs(std::span<const AgentFrame> frames) {
  std::vector<const AgentFrame*> out;
  for (const auto& f : frames) out.push_back(&f);
  return out;
}

void check_inputs(std::span<const AgentFrame* const> frames,
                  std::span<const DepthBins> bins) {
  if (frames.size() != bins.size()) {
    throw std::invalid_argument("one DepthBins per frame required");
  }
  for (size_t a = 0; a < frames.size(); ++a) {
    if (frames[a]->unary_logits.dim2() != bins[a].k) {
      std::ostringstream msg;
      msg << "frame " << a << " has " << frames[a]->unary_logits.dim2()
          << " logits per pixel but " << bins[a].k << " bins";
      throw std::invalid_argument(msg.str());
    }
  }
}

void check_pair(const CorrespondencePair& p,
                std::span<const AgentFrame* const> frames) {
  const int n = static_cast<int>(frames.size());
  if (p.agent_a < 0 || p.agent_a >= n || p.agent_b < 0 || p.agent_b >= n) {
    throw std::invalid_argument("correspondence agent out of range");
  }
  const auto& fa = *frames[p.agent_a];
  const auto& fb = *frames[p.agent_b];
  if (p.pixel_a < 0 || p.pixel_a >= fa.height * fa.width || p.pixel_b < 0 ||
      p.pixel_b >= fb.height * fb.width) {
    throw std::invalid_argument("correspondence pixel out of range");
  }
  if (p.agent_a == p.agent_b && p.pixel_a == p.pixel_b) {
    throw std::invalid_argument("correspondence links a pixel to itself");
  }
}

// Unordered edge set; the same link listed in both directions counts once.
std::vector<CorrespondencePair> unique_edges(
    const Correspondence& corr, std::span<const AgentFrame* const> frames) {
  std::map<std::tuple<int, int, int, int>, size_t> seen;
  std::vector<CorrespondencePair> out;
  for (const auto& p : corr.pairs) {
    check_pair(p, frames);
    auto key = std::make_tuple(p.agent_a, p.pixel_a, p.agent_b, p.pixel_b);
    auto rev = std::make_tuple(p.agent_b, p.pixel_b, p.agent_a, p.pixel_a);
    if (seen.count(key) || seen.count(rev)) continue;
    seen.emplace(key, out.size());
    out.push_back(p);
  }
  return out;
}

}  // namespace

int DepthBins::bin_of(double d) const {
  const int i = static_cast<int>(std::floor((d - d_min) / spacing()));
  return std::clamp(i, 0, k - 1);
}

DepthBins make_depth_bins(double d_min, double d_max, int k) {
  if (!(d_min >= 0.0) || !(d_max > d_min) || k < 2) {
    std::ostringstream msg;
    msg << "depth bins need 0 <= d_min < d_max and k >= 2 (got d_min=" << d_min
        << ", d_max=" << d_max << ", k=" << k << ")";
    throw std::invalid_argument(msg.str());
  }
  DepthBins b;
  b.k = k;
  b.d_min = d_min;
  b.d_max = d_max;
  const double step = (d_max - d_min) / k;
  b.centers.resize(k);
  for (int i = 0; i < k; ++i) b.centers[i] = d_min + (i + 0.5) * step;
  return b;
}

void validate(const CrfParams& p) {
  if (!(p.theta > 0.0)) throw std::invalid_argument("crf theta must be > 0");
  if (p.w_intra < 0.0 || p.w_cross < 0.0) {
    throw std::invalid_argument("crf weights must be >= 0");
  }
  if (p.iterations < 0) throw std::invalid_argument("crf iterations must be >= 0");
  if (p.neighborhood_radius < 0) {
    throw std::invalid_argument("crf neighborhood_radius must be >= 0");
  }
}

double DepthDistribution::expected_depth(int row, int col) const {
  const auto q_row = q.row(row, col);
  double e = 0.0;
  for (int k = 0; k < bins.k; ++k) e += q_row[k] * bins.centers[k];
  return e;
}

int DepthDistribution::argmax(int row, int col) const {
  const auto q_row = q.row(row, col);
  return static_cast<int>(std::max_element(q_row.begin(), q_row.end()) -
                          q_row.begin());
}

void Correspondence::append(const Correspondence& other) {
  pairs.insert(pairs.end(), other.pairs.begin(), other.pairs.end());
}

Tensor3 normalized_unary(const Tensor3& logits) {
  Tensor3 out(logits.dim0(), logits.dim1(), logits.dim2());
  for (int r = 0; r < logits.dim0(); ++r) {
    for (int c = 0; c < logits.dim1(); ++c) {
      softmax_row(logits.row(r, c), out.row(r, c));
    }
  }
  return out;
}

SparseRows normalized_unary(const SparseRows& logits) {
  SparseRows out(logits.dim0(), logits.dim1(), logits.dim2());
  softmax_row(logits.default_row(), out.mutable_default_row());
  for (int r = 0; r < logits.dim0(); ++r) {
    for (int c = 0; c < logits.dim1(); ++c) {
      if (logits.has_row(r, c)) softmax_row(logits.row(r, c), out.row(r, c));
    }
  }
  return out;
}

Tensor3 unary(const Tensor3& logits) {
  Tensor3 out = normalized_unary(logits);
  for (double& x : out.data()) x = -std::log(std::max(x, kProbFloor));
  return out;
}

double semantic_kernel(std::span<const double> s_i, std::span<const double> s_j,
                       double theta) {
  if (s_i.size() != s_j.size()) {
    throw std::invalid_argument("semantic vectors differ in length");
  }
  double d2 = 0.0;
  for (size_t c = 0; c < s_i.size(); ++c) {
    const double d = s_i[c] - s_j[c];
    d2 += d * d;
  }
  return std::exp(-d2 / (2.0 * theta * theta));
}

double pairwise_depth(double depth_i, double depth_j,
                      std::span<const double> s_i, std::span<const double> s_j,
                      double weight, double theta) {
  if (depth_i == depth_j || weight == 0.0) return 0.0;
  return weight * semantic_kernel(s_i, s_j, theta) * std::abs(depth_i - depth_j);
}

double pairwise(int label_i, int label_j, std::span<const double> s_i,
                std::span<const double> s_j, bool same_domain,
                const CrfParams& params, const DepthBins& bins) {
  if (label_i < 0 || label_i >= bins.k || label_j < 0 || label_j >= bins.k) {
    throw std::out_of_range("pairwise: label outside the bin set");
  }
  return pairwise_depth(bins.centers[label_i], bins.centers[label_j], s_i, s_j,
                        same_domain ? params.w_intra : params.w_cross,
                        params.theta);
}

std::vector<double> expected_abs_deviation(std::span<const double> support,
                                           std::span<const double> weights,
                                           std::span<const double> queries) {
  const size_t n = support.size();
  std::vector<double> x(support.begin(), support.end());
  std::vector<double> w(weights.begin(), weights.end());
  if (n > 1 && x.front() > x.back()) {
    std::reverse(x.begin(), x.end());
    std::reverse(w.begin(), w.end());
  }
  // prefix[i] = sum over the first i support points.
  std::vector<double> pw(n + 1, 0.0), pwx(n + 1, 0.0);
  for (size_t i = 0; i < n; ++i) {
    pw[i + 1] = pw[i] + w[i];
    pwx[i + 1] = pwx[i] + w[i] * x[i];
  }
  std::vector<double> out(queries.size());
  for (size_t q = 0; q < queries.size(); ++q) {
    const double y = queries[q];
    const size_t m = std::upper_bound(x.begin(), x.end(), y) - x.begin();
    const double left = y * pw[m] - pwx[m];
    const double right = (pwx[n] - pwx[m]) - y * (pw[n] - pw[m]);
    out[q] = left + right;
  }
  return out;
}

double crf_energy(std::span<const Labeling> labelings,
                  std::span<const AgentFrame> frames,
                  const Correspondence& correspondence, const CrfParams& params,
                  std::span<const DepthBins> bins) {
  validate(params);
  const auto frame_refs = refs(frames);
  check_inputs(frame_refs, bins);
  if (labelings.size() != frames.size()) {
    throw std::invalid_argument("one labeling per frame required");
  }
  const NodeIndex nodes(frame_refs);
  double energy = 0.0;
  for (size_t a = 0; a < frames.size(); ++a) {
    const AgentFrame& f = frames[a];
    const auto& px = nodes.pixels[a];
    if (labelings[a].size() != static_cast<size_t>(f.height) * f.width) {
      throw std::invalid_argument("labeling size does not match frame");
    }
    if (params.mode == CrfMode::kExact &&
        px.size() > static_cast<size_t>(kExactPixelCap)) {
      std::ostringstream msg;
      msg << "exact CRF mode supports at most " << kExactPixelCap
          << " visible pixels per agent, frame " << a << " has " << px.size();
      throw CapacityError(msg.str());
    }
    std::vector<double> p(bins[a].k);
    for (int flat : px) {
      const int label = labelings[a][flat];
      if (label < 0 || label >= bins[a].k) {
        throw std::out_of_range("labeling contains an invalid bin");
      }
      softmax_row(f.unary_logits.row(flat / f.width, flat % f.width), p);
      energy += -std::log(std::max(p[label], kProbFloor));
    }
    if (params.w_intra == 0.0) continue;
    auto term = [&](int pi, int pj) {
      return pairwise(labelings[a][pi], labelings[a][pj], feature_at(f, pi),
                      feature_at(f, pj), true, params, bins[a]);
    };
    if (params.mode == CrfMode::kExact) {
      for (size_t i = 0; i < px.size(); ++i) {
        for (size_t j = 0; j < px.size(); ++j) {
          if (i != j) energy += term(px[i], px[j]);
        }
      }
      continue;
    }
    // Each unordered window pair once, doubled (the kernel is symmetric).
    const int rad = params.neighborhood_radius;
    for (int pi : px) {
      const int r0 = pi / f.width;
      const int c0 = pi % f.width;
      for (int r = r0; r <= std::min(f.height - 1, r0 + rad); ++r) {
        const int c_begin = r == r0 ? c0 + 1 : std::max(0, c0 - rad);
        for (int c = c_begin; c <= std::min(f.width - 1, c0 + rad); ++c) {
          if (!f.visible(r, c)) continue;
          energy += 2.0 * term(pi, r * f.width + c);
        }
      }
    }
  }
  for (const auto& e : unique_edges(correspondence, frame_refs)) {
    const AgentFrame& fa = frames[e.agent_a];
    const AgentFrame& fb = frames[e.agent_b];
    if (!fa.visible(e.pixel_a / fa.width, e.pixel_a % fa.width) ||
        !fb.visible(e.pixel_b / fb.width, e.pixel_b % fb.width)) {
      continue;
    }
    const double w = fa.domain == fb.domain ? params.w_intra : params.w_cross;
    const double da = bins[e.agent_a].centers[labelings[e.agent_a][e.pixel_a]];
    const double db = bins[e.agent_b].centers[labelings[e.agent_b][e.pixel_b]];
    const auto sa = feature_at(fa, e.pixel_a);
    const auto sb = feature_at(fb, e.pixel_b);
    energy += pairwise_depth(da, e.a_offset + e.a_scale * db, sa, sb, w,
                             params.theta);
    energy += pairwise_depth(db, e.b_offset + e.b_scale * da, sa, sb, w,
                             params.theta);
  }
  return energy;
}

Correspondence cross_domain_correspondence(
    const AgentFrame& frame_a, const AgentFrame& frame_b,
    const CameraModel& cam_a, const CameraModel& cam_b,
    const DepthDistribution& dist_a, int agent_a, int agent_b) {
  if (dist_a.q.dim0() != frame_a.height || dist_a.q.dim1() != frame_a.width) {
    throw std::invalid_argument("distribution does not match frame_a");
  }
  Correspondence out;
  const Eigen::Vector3d center_a = cam_a.center();
  const Eigen::Vector3d center_b = cam_b.center();
  const double a_offset = camera_depth(center_b, cam_a);
  const double b_offset = camera_depth(center_a, cam_b);
  const Eigen::RowVector3d axis_a = cam_a.rotation.row(2);
  const Eigen::RowVector3d axis_b = cam_b.rotation.row(2);
  for (int r = 0; r < frame_a.height; ++r) {
    for (int c = 0; c < frame_a.width; ++c) {
      if (!frame_a.visible(r, c)) continue;
      const double d = dist_a.expected_depth(r, c);
      if (!(d > 0.0)) continue;
      const auto px = project_world_to_pixel(
          unproject_pixel_to_world(c, r, d, cam_a), cam_b);
      if (!px) continue;
      const long ub = std::lround(px->u);
      const long vb = std::lround(px->v);
      if (ub < 0 || vb < 0 || ub >= frame_b.width || vb >= frame_b.height) {
        continue;
      }
      if (!frame_b.visible(static_cast<int>(vb), static_cast<int>(ub))) continue;
      CorrespondencePair p;
      p.agent_a = agent_a;
      p.pixel_a = r * frame_a.width + c;
      p.agent_b = agent_b;
      p.pixel_b = static_cast<int>(vb) * frame_b.width + static_cast<int>(ub);
      if (agent_a == agent_b && p.pixel_a == p.pixel_b) continue;
      p.a_offset = a_offset;
      p.a_scale = axis_a.dot(pixel_ray(static_cast<double>(ub),
                                       static_cast<double>(vb), cam_b));
      p.b_offset = b_offset;
      p.b_scale = axis_b.dot(pixel_ray(c, r, cam_a));
      out.pairs.push_back(p);
    }
  }
  return out;
}

std::vector<DepthDistribution> unary_distributions(
    std::span<const AgentFrame* const> frames, std::span<const DepthBins> bins) {
  check_inputs(frames, bins);
  std::vector<DepthDistribution> out;
  for (size_t a = 0; a < frames.size(); ++a) {
    out.push_back({normalized_unary(frames[a]->unary_logits), bins[a]});
  }
  return out;
}

std::vector<DepthDistribution> unary_distributions(
    std::span<const AgentFrame> frames, std::span<const DepthBins> bins) {
  const auto r = refs(frames);
  return unary_distributions(std::span<const AgentFrame* const>(r), bins);
}

namespace {

constexpr double kActiveRatio = 1e-12;

// sum_k w[k] |y - x[k]| for ascending x and arbitrary y, with reusable
// prefix buffers.
class AbsDeviation {
 public:
  void set(const double* x, const double* w, int n) {
    x_.resize(n);
    std::copy(x, x + n, x_.begin());
    pw_.resize(n + 1);
    pwx_.resize(n + 1);
    pw_[0] = 0.0;
    pwx_[0] = 0.0;
    for (int i = 0; i < n; ++i) {
      pw_[i + 1] = pw_[i] + w[i];
      pwx_[i + 1] = pwx_[i] + w[i] * x[i];
    }
  }
  // Support given in descending order.
  void set_reversed(const double* x, const double* w, int n) {
    rx_.resize(n);
    rw_.resize(n);
    for (int i = 0; i < n; ++i) {
      rx_[i] = x[n - 1 - i];
      rw_[i] = w[n - 1 - i];
    }
    set(rx_.data(), rw_.data(), n);
  }
  double operator()(double y) const {
    return at(std::upper_bound(x_.begin(), x_.end(), y) - x_.begin(), y);
  }
  // Value at y given m, the number of support points <= y.
  double at(size_t m, double y) const {
    const size_t n = x_.size();
    return (y * pw_[m] - pwx_[m]) + (pwx_[n] - pwx_[m]) - y * (pw_[n] - pw_[m]);
  }
  // out[i] += coeff * value(y[i]) for monotone y (either direction).
  void accumulate(const double* y, int count, double coeff, double* out) const {
    if (count == 0) return;
    const size_t n = x_.size();
    size_t m = std::upper_bound(x_.begin(), x_.end(), y[0]) - x_.begin();
    for (int i = 0; i < count; ++i) {
      while (m < n && x_[m] <= y[i]) ++m;
      while (m > 0 && x_[m - 1] > y[i]) --m;
      out[i] += coeff * at(m, y[i]);
    }
  }

 private:
  std::vector<double> x_, pw_, pwx_, rx_, rw_;
};

struct Edge {
  int agent;
  int node;
  double coupling;
  // Partner depth D' maps onto this agent's depth scale as off + scale * D',
  // this agent's depth D onto the partner's as rev_off + rev_scale * D.
  double off, scale, rev_off, rev_scale;
};

// Compressed adjacency: edges of node i are [start[i], start[i + 1]).
struct Adjacency {
  std::vector<size_t> start;
  std::vector<Edge> edges;
};

}  // namespace

std::vector<DepthDistribution> mean_field_refine(
    std::span<const AgentFrame* const> frames,
    const Correspondence& correspondence, const CrfParams& params,
    std::span<const DepthBins> bins) {
  return mean_field_refine(frames, correspondence, params, bins,
                           unary_distributions(frames, bins));
}

std::vector<DepthDistribution> mean_field_refine(
    std::span<const AgentFrame* const> frames,
    const Correspondence& correspondence, const CrfParams& params,
    std::span<const DepthBins> bins, std::vector<DepthDistribution> out) {
  validate(params);
  check_inputs(frames, bins);
  if (out.size() != frames.size()) {
    throw std::invalid_argument("one unary distribution per frame required");
  }
  for (size_t a = 0; a < frames.size(); ++a) {
    if (out[a].q.dim0() != frames[a]->height || out[a].q.dim1() != frames[a]->width ||
        out[a].q.dim2() != bins[a].k) {
      throw std::invalid_argument("unary distribution does not match frame");
    }
  }
  if (params.iterations == 0 ||
      (params.w_intra == 0.0 && params.w_cross == 0.0)) {
    return out;
  }
  const NodeIndex nodes(frames);
  const size_t num_agents = frames.size();
  for (size_t a = 0; a < num_agents; ++a) {
    if (params.mode == CrfMode::kExact &&
        nodes.pixels[a].size() > static_cast<size_t>(kExactPixelCap)) {
      std::ostringstream msg;
      msg << "exact CRF mode supports at most " << kExactPixelCap
          << " visible pixels per agent, frame " << a << " has "
          << nodes.pixels[a].size();
      throw CapacityError(msg.str());
    }
  }

  // Cross links, gathered per node before building the adjacency.
  std::vector<std::vector<std::vector<Edge>>> cross(num_agents);
  for (size_t a = 0; a < num_agents; ++a) cross[a].resize(nodes.pixels[a].size());
  for (const auto& e : unique_edges(correspondence, frames)) {
    const int ia = nodes.node_of[e.agent_a][e.pixel_a];
    const int jb = nodes.node_of[e.agent_b][e.pixel_b];
    if (ia < 0 || jb < 0) continue;
    const AgentFrame& fa = *frames[e.agent_a];
    const AgentFrame& fb = *frames[e.agent_b];
    const double w = fa.domain == fb.domain ? params.w_intra : params.w_cross;
    if (w == 0.0) continue;
    const double k = semantic_kernel(feature_at(fa, e.pixel_a),
                                     feature_at(fb, e.pixel_b), params.theta);
    cross[e.agent_a][ia].push_back(
        {e.agent_b, jb, w * k, e.a_offset, e.a_scale, e.b_offset, e.b_scale});
    cross[e.agent_b][jb].push_back(
        {e.agent_a, ia, w * k, e.b_offset, e.b_scale, e.a_offset, e.a_scale});
  }

  // Intra neighbours carry both orderings of the pair: 2 * w * kernel.
  std::vector<Adjacency> intra(num_agents), links(num_agents);
  for (size_t a = 0; a < num_agents; ++a) {
    const AgentFrame& f = *frames[a];
    const auto& px = nodes.pixels[a];
    intra[a].start.assign(1, 0);
    links[a].start.assign(1, 0);
    const int rad = params.neighborhood_radius;
    for (size_t i = 0; i < px.size(); ++i) {
      const int r = px[i] / f.width;
      const int c = px[i] % f.width;
      const auto si = feature_at(f, px[i]);
      auto add = [&](int j) {
        const double k = semantic_kernel(si, feature_at(f, px[j]), params.theta);
        intra[a].edges.push_back({static_cast<int>(a), j, 2.0 * params.w_intra * k,
                                  0.0, 1.0, 0.0, 1.0});
      };
      if (params.w_intra > 0.0) {
        if (params.mode == CrfMode::kExact) {
          for (size_t j = 0; j < px.size(); ++j) {
            if (j != i) add(static_cast<int>(j));
          }
        } else {
          for (int rr = std::max(0, r - rad); rr <= std::min(f.height - 1, r + rad); ++rr) {
            for (int cc = std::max(0, c - rad); cc <= std::min(f.width - 1, c + rad); ++cc) {
              if (rr == r && cc == c) continue;
              const int j = nodes.node_of[a][rr * f.width + cc];
              if (j >= 0) add(j);
            }
          }
        }
      }
      intra[a].start.push_back(intra[a].edges.size());
      for (const auto& e : cross[a][i]) links[a].edges.push_back(e);
      links[a].start.push_back(links[a].edges.size());
    }
  }
  cross.clear();

  // Marginals over each node's active bin range [lo, hi), packed back to
  // back; node i starts at start[i].
  std::vector<std::vector<double>> prior(num_agents), q(num_agents), next(num_agents);
  std::vector<std::vector<int>> lo(num_agents), hi(num_agents);
  std::vector<std::vector<size_t>> start(num_agents);
  for (size_t a = 0; a < num_agents; ++a) {
    const AgentFrame& f = *frames[a];
    const int k = bins[a].k;
    const size_t n = nodes.pixels[a].size();
    lo[a].resize(n);
    hi[a].resize(n);
    start[a].resize(n);
    for (size_t i = 0; i < n; ++i) {
      const int flat = nodes.pixels[a][i];
      const auto row = std::as_const(out[a].q).row(flat / f.width, flat % f.width);
      const double mx = *std::max_element(row.begin(), row.end());
      int first = k, last = -1;
      for (int l = 0; l < k; ++l) {
        if (row[l] >= kActiveRatio * mx) {
          first = std::min(first, l);
          last = l;
        }
      }
      lo[a][i] = first;
      hi[a][i] = last + 1;
      start[a][i] = prior[a].size();
      double sum = 0.0;
      for (int l = first; l <= last; ++l) sum += row[l];
      for (int l = first; l <= last; ++l) prior[a].push_back(row[l] / sum);
    }
    q[a] = prior[a];
    next[a] = prior[a];
  }

  AbsDeviation ead;
  std::vector<double> hist, msg, mapped, support;
  for (int it = 0; it < params.iterations; ++it) {
    for (size_t a = 0; a < num_agents; ++a) {
      const auto& centers = bins[a].centers;
      const int k = bins[a].k;
      hist.assign(k, 0.0);
      msg.resize(k);
      mapped.resize(k);
      for (size_t i = 0; i < nodes.pixels[a].size(); ++i) {
        const int l0 = lo[a][i];
        const int l1 = hi[a][i];
        std::fill(msg.begin() + l0, msg.begin() + l1, 0.0);
        const size_t e0 = intra[a].start[i];
        const size_t e1 = intra[a].start[i + 1];
        if (e1 > e0) {
          int h0 = k, h1 = 0;
          for (size_t e = e0; e < e1; ++e) {
            const Edge& nb = intra[a].edges[e];
            const double* qj = &q[a][start[a][nb.node]];
            const int j0 = lo[a][nb.node];
            const int j1 = hi[a][nb.node];
            h0 = std::min(h0, j0);
            h1 = std::max(h1, j1);
            for (int l = j0; l < j1; ++l) hist[l] += nb.coupling * qj[l - j0];
          }
          ead.set(centers.data() + h0, hist.data() + h0, h1 - h0);
          // Queries share the uniform support grid.
          for (int l = l0; l < l1; ++l) {
            msg[l] += ead.at(std::clamp(l - h0 + 1, 0, h1 - h0), centers[l]);
          }
          std::fill(hist.begin() + h0, hist.begin() + h1, 0.0);
        }
        for (size_t e = links[a].start[i]; e < links[a].start[i + 1]; ++e) {
          const Edge& link = links[a].edges[e];
          const auto& pc = bins[link.agent].centers;
          const int j0 = lo[link.agent][link.node];
          const int j1 = hi[link.agent][link.node];
          const double* qj = &q[link.agent][start[link.agent][link.node]];
          // psi_ij: own label against the partner label on the own scale.
          support.resize(j1 - j0);
          for (int l = j0; l < j1; ++l) support[l - j0] = link.off + link.scale * pc[l];
          if (link.scale >= 0.0) {
            ead.set(support.data(), qj, j1 - j0);
          } else {
            ead.set_reversed(support.data(), qj, j1 - j0);
          }
          ead.accumulate(centers.data() + l0, l1 - l0, link.coupling, msg.data() + l0);
          // psi_ji: partner label against the own label on the partner scale.
          ead.set(pc.data() + j0, qj, j1 - j0);
          for (int l = l0; l < l1; ++l) mapped[l] = link.rev_off + link.rev_scale * centers[l];
          ead.accumulate(mapped.data() + l0, l1 - l0, link.coupling, msg.data() + l0);
        }
        const double mn = *std::min_element(msg.begin() + l0, msg.begin() + l1);
        const double* p = &prior[a][start[a][i]];
        double* qi = &next[a][start[a][i]];
        double sum = 0.0;
        for (int l = l0; l < l1; ++l) {
          qi[l - l0] = p[l - l0] * std::exp(-(msg[l] - mn));
          sum += qi[l - l0];
        }
        if (sum > 0.0) {
          for (int l = 0; l < l1 - l0; ++l) qi[l] /= sum;
        } else {
          std::copy(p, p + (l1 - l0), qi);
        }
      }
    }
    std::swap(q, next);
  }

  for (size_t a = 0; a < num_agents; ++a) {
    const AgentFrame& f = *frames[a];
    for (size_t i = 0; i < nodes.pixels[a].size(); ++i) {
      const int flat = nodes.pixels[a][i];
      auto row = out[a].q.row(flat / f.width, flat % f.width);
      std::fill(row.begin(), row.end(), 0.0);
      const auto first = q[a].begin() + start[a][i];
      std::copy(first, first + (hi[a][i] - lo[a][i]), row.begin() + lo[a][i]);
    }
  }
  return out;
}

std::vector<DepthDistribution> mean_field_refine(
    std::span<const AgentFrame> frames, const Correspondence& correspondence,
    const CrfParams& params, std::span<const DepthBins> bins) {
  const auto r = refs(frames);
  return mean_field_refine(std::span<const AgentFrame* const>(r), correspondence,
                           params, bins);
}

}  // namespace aerocoop
