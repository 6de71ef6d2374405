// Independent reference implementations used by the unit tests and the
// acceptance binary. Written for clarity, not speed.
#ifndef AEROCOOP_TESTS_ORACLES_H_
#define AEROCOOP_TESTS_ORACLES_H_

#include <random>
#include <vector>

#include "aerocoop/depthcrf.h"
#include "aerocoop/detector.h"
#include "aerocoop/metrics.h"
#include "aerocoop/scenesim.h"

namespace oracle {

using namespace aerocoop;

// Fully visible h x w frame with random features and logits.
AgentFrame random_frame(int h, int w, int k, Domain domain, std::mt19937_64& rng,
                        double logit_scale = 1.0, double feat_scale = 0.5);

// Unary plus pairwise sums written as plain loops over every ordered pair.
double naive_energy(const std::vector<Labeling>& labelings,
                    const std::vector<AgentFrame>& frames,
                    const Correspondence& corr, const CrfParams& params,
                    const std::vector<DepthBins>& bins);

// Marginals of exp(-E) by enumerating every labeling of the visible pixels.
// Result [agent][flat pixel][bin].
std::vector<std::vector<std::vector<double>>> exact_marginals(
    const std::vector<AgentFrame>& frames, const Correspondence& corr,
    const CrfParams& params, const std::vector<DepthBins>& bins);

// Greedy matching done by repeated full scans, then the 101-point
// interpolated AP evaluated point by point.
std::optional<double> average_precision(const std::vector<Box3D>& preds,
                                        const std::vector<Box3D>& gts,
                                        ObjectClass cls, double d,
                                        const MetricsConfig& cfg = {});

Box3D random_box(std::mt19937_64& rng, double extent);

}  // namespace oracle

#endif  // AEROCOOP_TESTS_ORACLES_H_
