#pragma once

#include <optional>
#include <vector>

#include "boxfit/depthfilter.hpp"
#include "boxfit/dimsearch.hpp"
#include "boxfit/metrics.hpp"
#include "boxfit/pose.hpp"
#include "boxfit/scenegen.hpp"
#include "boxfit/segment.hpp"

namespace boxfit {

struct PipelineConfig {
    SegmentConfig segment;
    FilterConfig filter;
    bool depth_filter_enabled = true;
    SearchConfig search;
    IcpConfig icp;
    int hyp_icp_iters = 15;     // refinement budget while winnowing candidates
    double score_delta = 0.01;  // inlier band for hypothesis confidence
    int max_cloud_points = 1200;
    bool warm_start = false;
};

// The pose + depth-filter stage packaged as the search's pose refresher:
// backproject once, then per call enumerate 24 octahedral hypotheses around
// the PCA frame, coarse-refine, depth-filter, select by confidence, refine.
PoseEstimator make_pose_estimator(const DepthImage& obs_depth,
                                  const InstanceMask& obs_mask, int instance,
                                  const CameraIntrinsics& K,
                                  const PipelineConfig& cfg);

struct InstancePrediction {
    int label = 0;  // label in the segmentation mask
    Pose pose;
    BoxDims dims;
    double confidence = 0.0;
    SearchTrace trace;
    double wall_time_s = 0.0;
};

// Run the full per-instance pipeline on one frame. When external_mask is
// given the segmenter is skipped. Failed instances are skipped (count is
// reported through the returned list being shorter than the label set).
std::vector<InstancePrediction> estimate_frame(
    const DepthImage& depth, const CameraIntrinsics& K,
    const PipelineConfig& cfg,
    const std::optional<InstanceMask>& external_mask = std::nullopt);

// Match predictions against scene ground truth and produce one evaluated
// row per gt instance.
std::vector<InstanceResult> evaluate_scene(
    const Scene& scene, const std::vector<InstancePrediction>& preds,
    int scene_id);

}  // namespace boxfit
