#ifndef AEROCOOP_CDCA_H_
#define AEROCOOP_CDCA_H_

#include <array>
#include <span>

#include <Eigen/Core>

#include "aerocoop/bevlift.h"
#include "aerocoop/tensor.h"

namespace aerocoop {

inline constexpr int kPyramidLevels = 4;
// Spatial dims fed to the pyramid must be multiples of this.
inline constexpr int kPyramidAlign = 1 << (kPyramidLevels - 1);

struct Pyramid {
  std::array<Tensor3, kPyramidLevels> levels;    // level m pooled by 2^m
  std::array<Tensor3, kPyramidLevels> rescaled;  // back at level-0 size
};

struct FusionWeights {
  std::array<double, kPyramidLevels> beta{};
  std::array<double, kPyramidLevels> omega{};
};

// kCosine compares f_i with the mean of the two cascade halves. kLiteral
// divides by |f_i|^2 and dots against the ground half only.
enum class CorrelationMode { kCosine, kLiteral };

// kPerLocation: at every token cell the keys are the two domains' tokens at
// that cell. kGlobal: keys are every token of both domains.
enum class AttentionScope { kPerLocation, kGlobal };

struct AttentionConfig {
  int d_k = channel::kCount;
  int token_pool = 4;
  double lambda = 0.5;
  AttentionScope scope = AttentionScope::kPerLocation;
  CorrelationMode correlation = CorrelationMode::kCosine;
  // Rescale the weaker input so the RMS norms of the occupied cells match
  // before the chain runs.
  bool align_scales = true;
  // Leave all-zero tokens (blocks a domain did not observe) out of the keys.
  bool mask_empty = true;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Average pooling by `factor` (dims must divide) and bilinear upsampling
// with half-pixel centers and edge clamping.
Tensor3 average_pool(const Tensor3& f, int factor);
Tensor3 upsample_bilinear(const Tensor3& f, int factor);

// Throws std::invalid_argument when a spatial dim is not a multiple of 8.
Pyramid build_pyramid(const Tensor3& f);

// Channel concatenation, ground half first.
Tensor3 cascade(const Tensor3& f_veh, const Tensor3& f_uav);

FusionWeights correlation_weights(
    const Tensor3& f_i, std::span<const Tensor3> cascades,
    CorrelationMode mode = CorrelationMode::kCosine);

Tensor3 enhance(std::span<const Tensor3> rescaled, const FusionWeights& w);

// Row-wise softmax(Q K^T / sqrt(d_k)); one token per row.
Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& queries,
                                  const Eigen::MatrixXd& keys, int d_k);

struct AttentionOutput {
  Tensor3 veh;
  Tensor3 uav;
};

// Queries and keys come from the token-pooled maps. Values default to the
// same maps; pass value maps to mix other features with the same weights.
// Per-location scope applies its weights to full-resolution values; global
// scope attends over pooled value tokens and upsamples by replication.
AttentionOutput cross_domain_attention(const Tensor3& f_veh,
                                       const Tensor3& f_uav,
                                       const AttentionConfig& cfg);
AttentionOutput cross_domain_attention(const Tensor3& f_veh,
                                       const Tensor3& f_uav,
                                       const Tensor3& value_veh,
                                       const Tensor3& value_uav,
                                       const AttentionConfig& cfg);

// lambda * a + (1 - lambda) * b. Throws for lambda outside [0, 1].
Tensor3 blend(const Tensor3& a, const Tensor3& b, double lambda);

// Full chain on two same-grid maps. Grids whose dims are not multiples of 8
// are edge-padded for the pyramid and cropped afterwards.
BevFeature fuse(const BevFeature& bev_veh, const BevFeature& bev_uav,
                const AttentionConfig& cfg);

// Elementwise mean of several same-grid maps.
BevFeature mean_fuse(std::span<const BevFeature> maps);

}  // namespace aerocoop

#endif  // AEROCOOP_CDCA_H_
