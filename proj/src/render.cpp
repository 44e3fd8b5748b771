#include "boxfit/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "boxfit/errors.hpp"

namespace boxfit {

namespace {

constexpr double kNearClip = 1e-4;  // meters

// Clip a convex camera-frame polygon against z >= kNearClip.
int clip_near(const Vec3* in, int n, Vec3* out) {
    int m = 0;
    for (int i = 0; i < n; ++i) {
        const Vec3& a = in[i];
        const Vec3& b = in[(i + 1) % n];
        const bool ain = a.z() >= kNearClip;
        const bool bin = b.z() >= kNearClip;
        if (ain) out[m++] = a;
        if (ain != bin) {
            const double t = (kNearClip - a.z()) / (b.z() - a.z());
            out[m++] = a + t * (b - a);
        }
    }
    return m;
}

inline double edge_fn(const Vec2& a, const Vec2& b, double px, double py) {
    return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

// Top-left rule for counter-clockwise triangles in y-down image coordinates.
inline bool edge_accepts(const Vec2& a, const Vec2& b, double w) {
    if (w > 0.0) return true;
    if (w < 0.0) return false;
    const double dx = b.x() - a.x();
    const double dy = b.y() - a.y();
    return (dy < 0.0) || (dy == 0.0 && dx > 0.0);
}

// Rasterize one camera-frame triangle (all vertices in front of the camera).
void raster_cam_triangle(Vec3 c0, Vec3 c1, Vec3 c2, const CameraIntrinsics& K,
                         DepthImage& depth, InstanceMask& mask) {
    Vec2 p0(K.fx * c0.x() / c0.z() + K.cx, K.fy * c0.y() / c0.z() + K.cy);
    Vec2 p1(K.fx * c1.x() / c1.z() + K.cx, K.fy * c1.y() / c1.z() + K.cy);
    Vec2 p2(K.fx * c2.x() / c2.z() + K.cx, K.fy * c2.y() / c2.z() + K.cy);

    const double area = edge_fn(p0, p1, p2.x(), p2.y());
    if (area == 0.0) return;
    if (area < 0.0) {
        std::swap(p1, p2);
        std::swap(c1, c2);
    }

    const int x0 = std::max(0, int(std::floor(std::min({p0.x(), p1.x(), p2.x()}) - 0.5)));
    const int x1 = std::min(K.width - 1, int(std::ceil(std::max({p0.x(), p1.x(), p2.x()}) - 0.5)));
    const int y0 = std::max(0, int(std::floor(std::min({p0.y(), p1.y(), p2.y()}) - 0.5)));
    const int y1 = std::min(K.height - 1, int(std::ceil(std::max({p0.y(), p1.y(), p2.y()}) - 0.5)));
    if (x0 > x1 || y0 > y1) return;

    // 1/z is affine across the projected triangle; fit g with
    // g . (u, v, 1) = 1/z at the three vertices.
    Eigen::Matrix3d A;
    A << p0.x(), p0.y(), 1.0,  //
        p1.x(), p1.y(), 1.0,   //
        p2.x(), p2.y(), 1.0;
    const Vec3 rhs(1.0 / c0.z(), 1.0 / c1.z(), 1.0 / c2.z());
    const Vec3 g = A.fullPivLu().solve(rhs);

    for (int iy = y0; iy <= y1; ++iy) {
        const double py = iy + 0.5;
        for (int ix = x0; ix <= x1; ++ix) {
            const double px = ix + 0.5;
            const double w0 = edge_fn(p1, p2, px, py);
            const double w1 = edge_fn(p2, p0, px, py);
            const double w2 = edge_fn(p0, p1, px, py);
            if (!edge_accepts(p1, p2, w0) || !edge_accepts(p2, p0, w1) ||
                !edge_accepts(p0, p1, w2))
                continue;
            const double invz = g.x() * px + g.y() * py + g.z();
            if (invz <= 0.0) continue;
            const double z = 1.0 / invz;
            double& d = depth.at(ix, iy);
            if (d == 0.0 || z < d) {
                d = z;
                mask.at(ix, iy) = 1;
            }
        }
    }
}

}  // namespace

Vec2 project_point(const CameraIntrinsics& K, const Vec3& p) {
    if (p.z() <= 0.0)
        throw BehindCamera("project_point: point at non-positive depth");
    return Vec2(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy);
}

std::array<Vec3, 8> box_corners(const BoxDims& dims) {
    const Vec3 h = dims.half();
    std::array<Vec3, 8> c;
    for (int i = 0; i < 8; ++i) {
        c[i] = Vec3((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                    (i & 4) ? h.z() : -h.z());
    }
    return c;
}

RenderedView render_view(const BoxDims& dims, const Pose& pose,
                         const CameraIntrinsics& K) {
    if (!dims.valid())
        throw InvalidArgument("render_view: degenerate box dimensions");
    if (!K.valid()) throw InvalidArgument("render_view: invalid intrinsics");

    RenderedView view;
    view.depth = DepthImage(K.width, K.height);
    view.mask = InstanceMask(K.width, K.height);

    const auto local = box_corners(dims);
    std::array<Vec3, 8> cam;
    for (int i = 0; i < 8; ++i) cam[i] = pose.apply(local[i]);

    // Quad faces of the corner cube; index bit k selects the +k side.
    static constexpr int kFaces[6][4] = {
        {0, 2, 6, 4},  // -x
        {1, 5, 7, 3},  // +x
        {0, 4, 5, 1},  // -y
        {2, 3, 7, 6},  // +y
        {0, 1, 3, 2},  // -z
        {4, 6, 7, 5},  // +z
    };

    for (const auto& f : kFaces) {
        Vec3 quad[4] = {cam[f[0]], cam[f[1]], cam[f[2]], cam[f[3]]};
        Vec3 clipped[8];
        const int n = clip_near(quad, 4, clipped);
        for (int i = 2; i < n; ++i) {
            raster_cam_triangle(clipped[0], clipped[i - 1], clipped[i], K,
                                view.depth, view.mask);
        }
    }
    return view;
}

AxisExtents extents(const InstanceMask& mask, int instance, const BoxDims& dims,
                    const Pose& pose, const CameraIntrinsics& K) {
    AxisExtents out;

    const Vec3 view_ray = pose.translation.normalized();
    for (int a = 0; a < 3; ++a) {
        const Vec3 axis = pose.rotation.col(a);
        // Within 5 degrees of the viewing ray the image direction carries no
        // extent signal.
        const double ray_angle =
            std::acos(std::clamp(std::abs(axis.dot(view_ray)), 0.0, 1.0));
        if (ray_angle < 5.0 * 3.14159265358979323846 / 180.0) continue;
        const Vec3 e0 = pose.translation - 0.5 * dims[a] * axis;
        const Vec3 e1 = pose.translation + 0.5 * dims[a] * axis;
        if (e0.z() <= 0.0 || e1.z() <= 0.0) continue;
        const Vec2 q0 = project_point(K, e0);
        const Vec2 q1 = project_point(K, e1);
        const Vec2 d = q1 - q0;
        const double n = d.norm();
        if (n < 1e-3) continue;  // projected endpoints coincide
        out.observable[a] = true;
        out.dir[a] = d / n;
    }

    bool any = false;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const std::uint8_t v = mask.at(x, y);
            if (instance == 0 ? v == 0 : v != instance) continue;
            any = true;
            const double px = x + 0.5;
            const double py = y + 0.5;
            for (int a = 0; a < 3; ++a) {
                if (!out.observable[a]) continue;
                const double t = px * out.dir[a].x() + py * out.dir[a].y();
                lo[a] = std::min(lo[a], t);
                hi[a] = std::max(hi[a], t);
            }
        }
    }
    if (!any) throw EmptyMask("extents: no pixels with requested label");

    for (int a = 0; a < 3; ++a) {
        out.e[a] = out.observable[a] ? hi[a] - lo[a] : 0.0;
    }
    return out;
}

double depth_span(const DepthImage& depth, const InstanceMask& mask,
                  int instance) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    size_t n = 0;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const std::uint8_t v = mask.at(x, y);
            if (instance == 0 ? v == 0 : v != instance) continue;
            const double z = depth.at(x, y);
            if (z <= 0.0) continue;
            lo = std::min(lo, z);
            hi = std::max(hi, z);
            ++n;
        }
    }
    return n >= 2 ? hi - lo : 0.0;
}

}  // namespace boxfit
