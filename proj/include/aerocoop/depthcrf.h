#ifndef AEROCOOP_DEPTHCRF_H_
#define AEROCOOP_DEPTHCRF_H_

#include <span>
#include <vector>

#include "aerocoop/geometry.h"
#include "aerocoop/scenesim.h"
#include "aerocoop/tensor.h"

namespace aerocoop {

// Discrete depth labels: bin centers d_min + (i + 0.5) * (d_max - d_min) / k.
struct DepthBins {
  std::vector<double> centers;
  int k = 0;
  double d_min = 0.0;
  double d_max = 0.0;

  double spacing() const { return (d_max - d_min) / k; }
  // Index of the bin whose interval contains d (clamped to the range).
  int bin_of(double d) const;
};

// Throws std::invalid_argument unless 0 <= d_min < d_max and k >= 2.
DepthBins make_depth_bins(double d_min, double d_max, int k);

enum class CrfMode { kNeighborhood, kExact };

struct CrfParams {
  double theta = 1.0;    // semantic kernel bandwidth
  double w_intra = 0.02;
  double w_cross = 0.01;
  int neighborhood_radius = 2;  // Chebyshev radius in pixels
  int iterations = 5;
  CrfMode mode = CrfMode::kNeighborhood;
};

// Throws std::invalid_argument for theta <= 0, negative weights or
// iterations.
void validate(const CrfParams& params);

struct DepthDistribution {
  SparseRows q;  // H x W x K, rows sum to one
  DepthBins bins;

  double expected_depth(int row, int col) const;
  int argmax(int row, int col) const;
};

// Links pixel_a of agent_a with pixel_b of agent_b (flat row-major pixel
// indices). A depth D_b on the ray of pixel_b sits at camera-a depth
// a_offset + a_scale * D_b; b_offset / b_scale is the reverse map. These
// bring both labels onto one metric scale for the compatibility term.
struct CorrespondencePair {
  int agent_a = 0;
  int pixel_a = 0;
  int agent_b = 1;
  int pixel_b = 0;
  double a_offset = 0.0;
  double a_scale = 1.0;
  double b_offset = 0.0;
  double b_scale = 1.0;
};

struct Correspondence {
  std::vector<CorrespondencePair> pairs;

  void append(const Correspondence& other);
};

// psi_u = -log P(x = D_k) with P the softmax of each logit row, floored at
// 1e-12 before the logarithm.
Tensor3 unary(const Tensor3& logits);

// Softmax over the last axis.
Tensor3 normalized_unary(const Tensor3& logits);
SparseRows normalized_unary(const SparseRows& logits);

// exp(-|s_i - s_j|^2 / (2 theta^2)).
double semantic_kernel(std::span<const double> s_i, std::span<const double> s_j,
                       double theta);

// weight * kernel * |depth_i - depth_j|.
double pairwise_depth(double depth_i, double depth_j,
                      std::span<const double> s_i, std::span<const double> s_j,
                      double weight, double theta);

// Pairwise potential between two labels on one bin set; w_intra when
// same_domain, otherwise w_cross.
double pairwise(int label_i, int label_j, std::span<const double> s_i,
                std::span<const double> s_j, bool same_domain,
                const CrfParams& params, const DepthBins& bins);

// Per-agent flat label images (row-major, one bin index per pixel).
using Labeling = std::vector<int>;

// Energy over visible pixels: sum of unaries plus every ordered pair i != j
// inside one agent (all pairs in exact mode, Chebyshev neighbors otherwise)
// plus both orderings of every corresponded pair. Exact mode is capped at 64
// visible pixels per agent (CapacityError above that).
double crf_energy(std::span<const Labeling> labelings,
                  std::span<const AgentFrame> frames,
                  const Correspondence& correspondence, const CrfParams& params,
                  std::span<const DepthBins> bins);

// Reprojects every visible pixel of frame_a at its expected depth under
// dist_a into camera b and pairs it with the nearest visible pixel there.
Correspondence cross_domain_correspondence(
    const AgentFrame& frame_a, const AgentFrame& frame_b,
    const CameraModel& cam_a, const CameraModel& cam_b,
    const DepthDistribution& dist_a, int agent_a = 0, int agent_b = 1);

// Naive mean-field inference on the energy above. Each sweep recomputes all
// marginals from the previous iterate:
//   Q_i(l) ~ P_i(l) exp(-sum_j sum_l' Q_j(l') [psi_ij(l, l') + psi_ji(l', l)])
// where j runs over the intra-agent neighbors and corresponded pixels of i.
// Pixels outside the visibility mask keep their normalized unary. Bins whose
// unary probability is below 1e-12 of the row maximum (and lie outside the
// span of the bins above it) stay at zero.
std::vector<DepthDistribution> mean_field_refine(
    std::span<const AgentFrame> frames, const Correspondence& correspondence,
    const CrfParams& params, std::span<const DepthBins> bins);

// Same, on borrowed frames.
std::vector<DepthDistribution> mean_field_refine(
    std::span<const AgentFrame* const> frames,
    const Correspondence& correspondence, const CrfParams& params,
    std::span<const DepthBins> bins);

// Same, starting from already normalized unaries (as unary_distributions
// returns them), which are refined in place.
std::vector<DepthDistribution> mean_field_refine(
    std::span<const AgentFrame* const> frames,
    const Correspondence& correspondence, const CrfParams& params,
    std::span<const DepthBins> bins, std::vector<DepthDistribution> unary);

// Distributions straight from the unaries (the refinement-off path).
std::vector<DepthDistribution> unary_distributions(
    std::span<const AgentFrame> frames, std::span<const DepthBins> bins);
std::vector<DepthDistribution> unary_distributions(
    std::span<const AgentFrame* const> frames, std::span<const DepthBins> bins);

// sum_k weights[k] * |query - support[k]| for every query. Support must be
// monotone (either direction).
std::vector<double> expected_abs_deviation(std::span<const double> support,
                                           std::span<const double> weights,
                                           std::span<const double> queries);

}  // namespace aerocoop

#endif  // AEROCOOP_DEPTHCRF_H_
