#pragma once

#include <cstdint>

#include "boxfit/types.hpp"

namespace boxfit {

struct SegmentConfig {
    double plane_inlier_threshold = 0.008;  // meters
    double cluster_distance = 0.015;        // meters, between adjacent pixels
    int min_component_px = 200;
    int ransac_iters = 200;
    double min_plane_fraction = 0.15;  // of valid pixels, to remove a plane
    std::uint64_t seed = 0;
};

// Depth-only instance proposals: RANSAC dominant-plane removal, pixel-grid
// Euclidean clustering, small-component rejection. Labels are assigned in
// decreasing component size, contiguous from 1. No pixel without a depth
// return is ever labeled. Returns an empty mask when nothing survives.
InstanceMask segment_instances(const DepthImage& depth,
                               const CameraIntrinsics& K,
                               const SegmentConfig& cfg);

}  // namespace boxfit
