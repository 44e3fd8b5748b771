#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace boxfit {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

// Pinhole camera. Image x grows right, y grows down, z forward (meters).
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    bool valid() const {
        return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 &&
               cx < width && cy >= 0.0 && cy < height;
    }
};

// Rigid transform from box-local coordinates to camera coordinates.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return Pose{}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    Pose inverse() const {
        Pose inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.rotation * translation);
        return inv;
    }

    // R orthonormal and proper within tol.
    bool valid(double tol = 1e-9) const;
};

Pose compose(const Pose& a, const Pose& b);

// Per-axis dimensionless multipliers of the canonical template.
struct ScaleVec {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    Vec3 vec() const { return Vec3(sx, sy, sz); }
    static ScaleVec from(const Vec3& v) { return ScaleVec{v.x(), v.y(), v.z()}; }
    double operator[](int a) const { return a == 0 ? sx : (a == 1 ? sy : sz); }
    bool valid() const;
};

// Full edge lengths in meters.
struct BoxDims {
    double dx = 0.0;
    double dy = 0.0;
    double dz = 0.0;

    Vec3 vec() const { return Vec3(dx, dy, dz); }
    Vec3 half() const { return 0.5 * Vec3(dx, dy, dz); }
    double volume() const { return dx * dy * dz; }
    double operator[](int a) const { return a == 0 ? dx : (a == 1 ? dy : dz); }
    bool valid() const { return dx > 0.0 && dy > 0.0 && dz > 0.0; }
};

// The canonical category template is the unit cube centered at the origin,
// so dimensions are the per-axis scales read in meters.
BoxDims scaled_template(const ScaleVec& s);
ScaleVec scale_of(const BoxDims& d);

// Dense row-major depth raster, meters. 0.0 marks no return.
struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    DepthImage() = default;
    DepthImage(int w, int h) : width(w), height(h), data(size_t(w) * h, 0.0) {}

    double& at(int x, int y) { return data[size_t(y) * width + x]; }
    double at(int x, int y) const { return data[size_t(y) * width + x]; }
    bool empty() const { return data.empty(); }
};

// Row-major instance labels. 0 is background, k >= 1 is instance k.
struct InstanceMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    InstanceMask() = default;
    InstanceMask(int w, int h) : width(w), height(h), data(size_t(w) * h, 0) {}

    std::uint8_t& at(int x, int y) { return data[size_t(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[size_t(y) * width + x]; }
    size_t count(int instance) const;  // instance 0 counts all nonzero labels
};

// Per-axis scale bounds for the dimension search.
struct ScaleInterval {
    Vec3 lo = Vec3::Constant(0.05);
    Vec3 hi = Vec3::Constant(2.0);

    bool valid() const {
        return (lo.array() > 0.0).all() && (lo.array() <= hi.array()).all();
    }
};

// Depth-consistency statistics of one hypothesis against the observation.
struct DepthStats {
    double median_abs_residual = 0.0;  // meters; +inf when nothing compared
    double protrusion_fraction = 0.0;  // rendered closer than observed - tau_d
    double coverage = 0.0;             // compared pixels / rendered-mask pixels
};

struct Hypothesis {
    Pose pose;
    double confidence = 0.0;  // in [0,1]
    std::optional<DepthStats> depth_stats;
    bool fallback = false;  // set when kept only as the least-bad candidate
};

}  // namespace boxfit
