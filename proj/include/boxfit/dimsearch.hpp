#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "boxfit/errors.hpp"
#include "boxfit/render.hpp"
#include "boxfit/types.hpp"

namespace boxfit {

struct SearchConfig {
    double tau_px = 10.0;      // max per-axis extent error to accept
    double tau_scale = 0.01;   // alternative stop: interval width per axis
    int t_max = 20;
    ScaleInterval bounds_init;
    bool early_stop_enabled = true;
    double vertex_align_tol_deg = 5.0;
    // Depth-span differences below this carry no signal; the axis freezes
    // for the iteration instead of taking the tie-break.
    double span_tol = 0.005;  // meters
};

enum class StopReason {
    ExtentConverged,
    IntervalConverged,
    MaxIters,
    EarlyStopped,
};
const char* to_string(StopReason r);

// Per-axis bound decision: 'g'/'s' grow/shrink from pixel extents,
// 'G'/'S' grow/shrink from the depth-span signal (unobservable axis),
// '.' no update this iteration.
struct SearchIterRecord {
    int iter = 0;
    ScaleVec s;
    Vec3 lo = Vec3::Zero();  // interval being searched this iteration
    Vec3 hi = Vec3::Zero();
    Pose pose;
    Vec3 e_cad = Vec3::Zero();
    Vec3 e_obs = Vec3::Zero();
    std::array<bool, 3> observable{false, false, false};
    std::array<char, 3> decision{'.', '.', '.'};
    double rot_change_deg = 0.0;
};

struct SearchTrace {
    std::vector<SearchIterRecord> iters;
    StopReason reason = StopReason::MaxIters;
    int pose_estimates = 0;  // iterations used, counted as pose refreshes
    double wall_time_s = 0.0;
    bool any_fallback = false;
};

// Pose refresh contract used by the search: estimate the pose of the current
// template, optionally warm-started from the previous iterate.
struct PoseEstimateResult {
    Pose pose;
    double confidence = 0.0;
    bool fallback = false;
    double rmse = 0.0;
};
using PoseEstimator =
    std::function<PoseEstimateResult(const BoxDims&, const Pose* warm_start)>;

struct DimSearchResult {
    ScaleVec scale;
    Pose pose;
    double confidence = 0.0;
    SearchTrace trace;
};

// A pose-estimation error inside the loop surfaces with the partial trace.
struct DimSearchFailure : Error {
    DimSearchFailure(const std::string& what, SearchTrace t)
        : Error(what), trace(std::move(t)) {}
    SearchTrace trace;
};

// Predicate for switching to the one-step proportional update: the rotation
// has stabilized between consecutive refreshes (modulo box symmetry), and
// the visibly projected edges at the box vertex nearest the camera line up
// with the dominant boundary directions of the observed mask while meeting
// each other at right angles in the image. The right-angle condition keeps
// the per-axis extent ratios decoupled, which is what makes the one-step
// rescale exact.
bool axes_aligned_around_vertex(const BoxDims& dims, const Pose& pose,
                                const Pose& prev_pose,
                                const InstanceMask& obs_mask, int instance,
                                const CameraIntrinsics& K, double tol_deg);

// One-step per-axis rescale by the observed/rendered extent ratio.
// Unobservable axes keep their scale. Throws DegenerateExtent when a
// rendered extent vanishes on an observable axis.
ScaleVec proportional_update(const ScaleVec& s, const AxisExtents& e_obs,
                             const AxisExtents& e_cad);

// Per-axis binary search over template scale with a pose refresh per
// iteration. Bounds move by the sign of (observed - rendered) extents;
// exact ties count as overfill. Axes without image-extent signal are driven
// by the depth-span difference instead.
DimSearchResult binary_search_dims(const DepthImage& obs_depth,
                                   const InstanceMask& obs_mask, int instance,
                                   const CameraIntrinsics& K,
                                   const PoseEstimator& pose_estimator,
                                   const SearchConfig& cfg);

// binary_search_dims plus the early-stopping module: once the alignment
// predicate holds, apply one proportional rescale, refresh the pose once,
// and stop.
DimSearchResult estimate_dimensions(const DepthImage& obs_depth,
                                    const InstanceMask& obs_mask, int instance,
                                    const CameraIntrinsics& K,
                                    const PoseEstimator& pose_estimator,
                                    const SearchConfig& cfg);

}  // namespace boxfit
