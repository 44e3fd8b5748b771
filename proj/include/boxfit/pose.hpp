#pragma once

#include <vector>

#include "boxfit/types.hpp"

namespace boxfit {

struct PointCloud {
    std::vector<Vec3> points;

    bool empty() const { return points.empty(); }
    size_t size() const { return points.size(); }
};

// Lift masked depth pixels (label == instance) into camera-frame points.
// Throws EmptyCloud when no labeled pixel has a depth return.
PointCloud backproject(const DepthImage& depth, const InstanceMask& mask,
                       int instance, const CameraIntrinsics& K);

// Centroid + PCA frame of a cloud, right-handed, axes ordered by decreasing
// variance. Half-extents are the max absolute projections per axis.
struct ObbInit {
    Pose frame;
    Vec3 half_extents;
};
ObbInit obb_init(const PointCloud& cloud);

// The 24 octahedral orientation hypotheses of a frame: frame.R * g with
// identical translation, confidences initialized uniformly.
std::vector<Hypothesis> enumerate_hypotheses(const Pose& frame);

// Least-squares rigid transform mapping src onto dst (SVD, det +1 enforced).
Pose kabsch(const PointCloud& src, const PointCloud& dst);

struct IcpConfig {
    int max_iters = 50;
    double rot_tol_deg = 0.01;
    double trans_tol = 1e-4;  // meters
};

struct IcpResult {
    Pose pose;
    double rmse = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Iterative alignment of a box model to the cloud using analytic
// point-to-cuboid correspondences. Returns the best iterate seen; flagged
// non-converged when the residual grows five times in a row.
IcpResult icp_refine(const PointCloud& cloud, const BoxDims& dims,
                     const Pose& init, const IcpConfig& cfg = {});

// Nearest point on the surface of the box [-half, half] to a local point
// (interior points project to the closest face).
Vec3 closest_point_on_box(const Vec3& p_local, const Vec3& half);

// Unsigned distance from a camera-frame point to the posed box surface.
double box_surface_distance(const Vec3& p, const BoxDims& dims,
                            const Pose& pose);

// Fraction of cloud points within delta of the posed box surface.
double score_hypothesis(const Hypothesis& h, const PointCloud& cloud,
                        const BoxDims& dims, double delta = 0.01);

}  // namespace boxfit
