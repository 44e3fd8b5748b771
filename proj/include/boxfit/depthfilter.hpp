#pragma once

#include <vector>

#include "boxfit/types.hpp"

namespace boxfit {

struct FilterConfig {
    double tau_d = 0.015;               // protrusion tolerance, meters
    double max_median_residual = 0.02;  // meters
    double max_protrusion = 0.2;
    double min_coverage = 0.3;
};

// Render the hypothesis and compare against observed depth on
// rendered-mask ∩ instance-mask ∩ {observed depth > 0}. An empty comparison
// domain yields coverage 0 and an infinite residual. A pixel protrudes when
// its rendered depth is closer than observed - tau_d.
DepthStats depth_stats(const Hypothesis& h, const BoxDims& dims,
                       const DepthImage& obs_depth, const InstanceMask& obs_mask,
                       int instance, const CameraIntrinsics& K,
                       double tau_d = 0.015);

// Keep hypotheses passing all FilterConfig thresholds, with stats attached,
// ordered by decreasing confidence (stable). When everything is rejected the
// single hypothesis with the smallest median residual is returned, flagged
// as fallback. Throws InvalidArgument on empty input.
std::vector<Hypothesis> filter_hypotheses(const std::vector<Hypothesis>& hs,
                                          const BoxDims& dims,
                                          const DepthImage& obs_depth,
                                          const InstanceMask& obs_mask,
                                          int instance,
                                          const CameraIntrinsics& K,
                                          const FilterConfig& cfg);

}  // namespace boxfit
