#include "boxfit/pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "boxfit/errors.hpp"
#include "boxfit/metrics.hpp"

namespace boxfit {

PointCloud backproject(const DepthImage& depth, const InstanceMask& mask,
                       int instance, const CameraIntrinsics& K) {
    PointCloud cloud;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const std::uint8_t v = mask.at(x, y);
            if (instance == 0 ? v == 0 : v != instance) continue;
            const double z = depth.at(x, y);
            if (z <= 0.0) continue;
            const double px = x + 0.5;
            const double py = y + 0.5;
            cloud.points.emplace_back((px - K.cx) * z / K.fx,
                                      (py - K.cy) * z / K.fy, z);
        }
    }
    if (cloud.empty())
        throw EmptyCloud("backproject: no labeled pixels with valid depth");
    return cloud;
}

ObbInit obb_init(const PointCloud& cloud) {
    if (cloud.size() < 10)
        throw DegenerateCloud("obb_init: need at least 10 points");

    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : cloud.points) centroid += p;
    centroid /= double(cloud.size());

    Mat3 cov = Mat3::Zero();
    for (const Vec3& p : cloud.points) {
        const Vec3 d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= double(cloud.size());

    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 evals = eig.eigenvalues();  // ascending
    if (evals(1) <= 1e-12 * std::max(evals(2), 1e-300))
        throw DegenerateCloud("obb_init: rank-deficient covariance");

    // Decreasing variance; flip the last axis if needed for det +1.
    Mat3 rot;
    rot.col(0) = eig.eigenvectors().col(2);
    rot.col(1) = eig.eigenvectors().col(1);
    rot.col(2) = eig.eigenvectors().col(0);
    if (rot.determinant() < 0.0) rot.col(2) = -rot.col(2);

    Vec3 half = Vec3::Zero();
    for (const Vec3& p : cloud.points) {
        const Vec3 q = rot.transpose() * (p - centroid);
        half = half.cwiseMax(q.cwiseAbs());
    }

    ObbInit init;
    init.frame.rotation = rot;
    init.frame.translation = centroid;
    init.half_extents = half;
    return init;
}

std::vector<Hypothesis> enumerate_hypotheses(const Pose& frame) {
    std::vector<Hypothesis> out;
    const auto& group = octahedral_rotations();
    out.reserve(group.size());
    for (const Mat3& g : group) {
        Hypothesis h;
        h.pose.rotation = frame.rotation * g;
        h.pose.translation = frame.translation;
        h.confidence = 1.0 / double(group.size());
        out.push_back(h);
    }
    return out;
}

Pose kabsch(const PointCloud& src, const PointCloud& dst) {
    if (src.size() != dst.size() || src.size() < 3)
        throw RankError("kabsch: need matched point sets of size >= 3");

    Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
    for (const Vec3& p : src.points) cs += p;
    for (const Vec3& p : dst.points) cd += p;
    cs /= double(src.size());
    cd /= double(dst.size());

    Mat3 h = Mat3::Zero();
    for (size_t i = 0; i < src.size(); ++i) {
        h += (src.points[i] - cs) * (dst.points[i] - cd).transpose();
    }

    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300))
        throw RankError("kabsch: degenerate (collinear) configuration");

    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0
                  ? -1.0
                  : 1.0;
    Pose out;
    out.rotation = svd.matrixV() * d * svd.matrixU().transpose();
    out.translation = cd - out.rotation * cs;
    return out;
}

Vec3 closest_point_on_box(const Vec3& p, const Vec3& half) {
    const Vec3 clamped = p.cwiseMax(-half).cwiseMin(half);
    if ((clamped - p).squaredNorm() > 0.0) return clamped;  // outside

    // Interior: push to the nearest face.
    int axis = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double gap = half[a] - std::abs(p[a]);
        if (gap < best) {
            best = gap;
            axis = a;
        }
    }
    Vec3 q = p;
    q[axis] = p[axis] >= 0.0 ? half[axis] : -half[axis];
    return q;
}

double box_surface_distance(const Vec3& p, const BoxDims& dims,
                            const Pose& pose) {
    const Vec3 local = pose.rotation.transpose() * (p - pose.translation);
    return (closest_point_on_box(local, dims.half()) - local).norm();
}

IcpResult icp_refine(const PointCloud& cloud, const BoxDims& dims,
                     const Pose& init, const IcpConfig& cfg) {
    if (cloud.empty()) throw EmptyCloud("icp_refine: empty cloud");
    if (!dims.valid()) throw InvalidArgument("icp_refine: degenerate dims");

    const Vec3 half = dims.half();
    Pose cur = init;

    auto rmse_of = [&](const Pose& pose) {
        double s = 0.0;
        for (const Vec3& p : cloud.points) {
            const Vec3 local = pose.rotation.transpose() * (p - pose.translation);
            s += (closest_point_on_box(local, half) - local).squaredNorm();
        }
        return std::sqrt(s / double(cloud.size()));
    };

    IcpResult best;
    best.pose = cur;
    best.rmse = rmse_of(cur);

    PointCloud model;
    model.points.resize(cloud.size());

    int rising = 0;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        for (size_t i = 0; i < cloud.size(); ++i) {
            const Vec3 local =
                cur.rotation.transpose() * (cloud.points[i] - cur.translation);
            model.points[i] = closest_point_on_box(local, half);
        }

        Pose next;
        try {
            next = kabsch(model, cloud);
        } catch (const RankError&) {
            break;  // correspondences collapsed; keep best so far
        }

        const double rot_step = geodesic_deg(next.rotation, cur.rotation);
        const double trans_step = (next.translation - cur.translation).norm();
        cur = next;

        const double r = rmse_of(cur);
        if (r < best.rmse) {
            best.rmse = r;
            best.pose = cur;
            rising = 0;
        } else {
            if (++rising >= 5) {
                best.iterations = it;
                best.converged = false;
                return best;
            }
        }

        if (rot_step < cfg.rot_tol_deg && trans_step < cfg.trans_tol) {
            best.iterations = it;
            best.converged = true;
            return best;
        }
    }
    best.iterations = cfg.max_iters;
    best.converged = false;
    return best;
}

double score_hypothesis(const Hypothesis& h, const PointCloud& cloud,
                        const BoxDims& dims, double delta) {
    if (cloud.empty()) return 0.0;
    size_t inliers = 0;
    for (const Vec3& p : cloud.points) {
        if (box_surface_distance(p, dims, h.pose) <= delta) ++inliers;
    }
    return double(inliers) / double(cloud.size());
}

}  // namespace boxfit
