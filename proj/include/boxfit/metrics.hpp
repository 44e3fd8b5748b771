#pragma once

#include <functional>
#include <string>
#include <vector>

#include "boxfit/types.hpp"

namespace boxfit {

// The 24 proper rotations of the octahedral group (signed permutation
// matrices with determinant +1), in a fixed deterministic order.
const std::vector<Mat3>& octahedral_rotations();

// Geodesic angle between two rotations, degrees.
double geodesic_deg(const Mat3& a, const Mat3& b);

// Proper symmetry group of a cuboid: rotations that map the dimension
// vector onto itself. Order 4 for distinct dims up to 24 for a cube;
// near-square faces are merged within eq_tol (meters).
std::vector<Mat3> box_symmetry_group(const BoxDims& dims, double eq_tol = 1e-6);

// Exact intersection-over-union of two oriented boxes via convex polytope
// clipping, evaluated in box B's local frame.
double iou3d(const Pose& pose_a, const BoxDims& dims_a, const Pose& pose_b,
             const BoxDims& dims_b);

// Intersection volume only (m^3); used for interpenetration checks.
double box_intersection_volume(const Pose& pose_a, const BoxDims& dims_a,
                               const Pose& pose_b, const BoxDims& dims_b);

// Rotation error minimized over the box symmetry group, degrees.
double rotation_error_sym(const Mat3& r_pred, const Mat3& r_gt,
                          const BoxDims& dims, double eq_tol = 1e-6);

// True iff symmetry-aware rotation error <= n_deg and translation error
// <= m_cm (both inclusive).
bool pose_true_positive(const Pose& pred, const Pose& gt, const BoxDims& gt_dims,
                        double n_deg, double m_cm);

// One evaluated ground-truth instance: the assigned prediction's metrics,
// or matched == false when no prediction was assigned.
struct InstanceResult {
    int scene_id = 0;
    int gt_id = 0;
    bool matched = false;
    double iou = 0.0;
    double rot_err_deg = 180.0;
    double trans_err_cm = 1e9;
    double confidence = 0.0;
    int iterations = 0;
    double wall_time_s = 0.0;
    std::string trace_reason = "unmatched";
};

// Greedy detection-style assignment: predictions in decreasing confidence
// each claim the unassigned gt with maximal IoU3D (> 0).
struct PredictionForMatch {
    Pose pose;
    BoxDims dims;
    double confidence = 0.0;
};
struct GtForMatch {
    Pose pose;
    BoxDims dims;
};
// Returns, per prediction, the gt index it was assigned to (-1 if none).
std::vector<int> match_predictions(const std::vector<PredictionForMatch>& preds,
                                   const std::vector<GtForMatch>& gts);

// Fraction of gt instances whose assigned prediction satisfies the
// criterion. Throws UndefinedMetric on an empty result set.
double average_precision(const std::vector<InstanceResult>& results,
                         const std::function<bool(const InstanceResult&)>& criterion);

}  // namespace boxfit
