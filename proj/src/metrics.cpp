#include "boxfit/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "boxfit/errors.hpp"

namespace boxfit {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Convex polygon in 3D with a fixed small capacity (clipping a quad by six
// planes yields at most 10 vertices).
struct Poly {
    Vec3 v[16];
    int n = 0;
};

// Keep the part of poly with normal . p <= offset + eps.
Poly clip_halfspace(const Poly& in, const Vec3& normal, double offset,
                    double eps) {
    Poly out;
    for (int i = 0; i < in.n; ++i) {
        const Vec3& a = in.v[i];
        const Vec3& b = in.v[(i + 1) % in.n];
        const double da = normal.dot(a) - offset;
        const double db = normal.dot(b) - offset;
        const bool ain = da <= eps;
        const bool bin = db <= eps;
        if (ain) out.v[out.n++] = a;
        if (ain != bin) {
            const double t = da / (da - db);
            out.v[out.n++] = a + t * (b - a);
        }
    }
    return out;
}

// Signed flux of x through a polygon fan; summing over a closed outward
// surface gives 6 * volume.
double flux6(const Poly& p) {
    double s = 0.0;
    for (int i = 2; i < p.n; ++i) {
        s += p.v[0].dot(p.v[i - 1].cross(p.v[i]));
    }
    return s;
}

// Outward-ordered quad faces of an axis box [-h, h] transformed by (R, t).
void box_faces(const Mat3& R, const Vec3& t, const Vec3& h, Poly out[6]) {
    static constexpr int kFaceIdx[6][4] = {
        {0, 4, 6, 2}, {1, 3, 7, 5},  // -x, +x
        {0, 1, 5, 4}, {2, 6, 7, 3},  // -y, +y
        {0, 2, 3, 1}, {4, 5, 7, 6},  // -z, +z
    };
    Vec3 corners[8];
    for (int i = 0; i < 8; ++i) {
        const Vec3 c((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                     (i & 4) ? h.z() : -h.z());
        corners[i] = R * c + t;
    }
    for (int f = 0; f < 6; ++f) {
        out[f].n = 4;
        for (int k = 0; k < 4; ++k) out[f].v[k] = corners[kFaceIdx[f][k]];
    }
}

// Intersection volume with box B as the axis-aligned frame. A-side faces are
// clipped inclusively, B-side faces strictly, so coplanar boundary faces are
// counted once.
double intersection_volume_local(const Mat3& Ra, const Vec3& ta, const Vec3& ha,
                                 const Vec3& hb) {
    constexpr double kEps = 1e-12;
    double s = 0.0;

    Poly faces[6];
    box_faces(Ra, ta, ha, faces);
    for (const Poly& f0 : faces) {
        Poly f = f0;
        for (int axis = 0; axis < 3 && f.n >= 3; ++axis) {
            Vec3 n = Vec3::Zero();
            n[axis] = 1.0;
            f = clip_halfspace(f, n, hb[axis], kEps);
            if (f.n < 3) break;
            n[axis] = -1.0;
            f = clip_halfspace(f, n, hb[axis], kEps);
        }
        if (f.n >= 3) s += flux6(f);
    }

    Poly bfaces[6];
    box_faces(Mat3::Identity(), Vec3::Zero(), hb, bfaces);
    for (const Poly& f0 : bfaces) {
        Poly f = f0;
        for (int axis = 0; axis < 3 && f.n >= 3; ++axis) {
            const Vec3 n = Ra.col(axis);
            const double c = n.dot(ta);
            f = clip_halfspace(f, n, c + ha[axis], -kEps);
            if (f.n < 3) break;
            f = clip_halfspace(f, -n, -(c - ha[axis]), -kEps);
        }
        if (f.n >= 3) s += flux6(f);
    }

    return std::max(0.0, s / 6.0);
}

}  // namespace

const std::vector<Mat3>& octahedral_rotations() {
    static const std::vector<Mat3> rots = [] {
        std::vector<Mat3> out;
        const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                 {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        for (const auto& p : perms) {
            for (int signs = 0; signs < 8; ++signs) {
                Mat3 m = Mat3::Zero();
                for (int c = 0; c < 3; ++c) {
                    m(p[c], c) = (signs >> c) & 1 ? -1.0 : 1.0;
                }
                if (m.determinant() > 0.5) out.push_back(m);
            }
        }
        return out;
    }();
    return rots;
}

double geodesic_deg(const Mat3& a, const Mat3& b) {
    // atan2 of (2 sin, 2 cos) keeps full precision near zero, where the
    // acos-of-trace form floors out around 1e-6 degrees.
    const Mat3 r = a.transpose() * b;
    const Vec3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    return std::atan2(v.norm(), r.trace() - 1.0) * 180.0 / kPi;
}

std::vector<Mat3> box_symmetry_group(const BoxDims& dims, double eq_tol) {
    std::vector<Mat3> group;
    const Vec3 d = dims.vec();
    for (const Mat3& g : octahedral_rotations()) {
        const Vec3 mapped = g.cwiseAbs() * d;
        if ((mapped - d).cwiseAbs().maxCoeff() <= eq_tol) group.push_back(g);
    }
    return group;
}

double box_intersection_volume(const Pose& pose_a, const BoxDims& dims_a,
                               const Pose& pose_b, const BoxDims& dims_b) {
    // Move into B's local frame for conditioning.
    const Pose rel = compose(pose_b.inverse(), pose_a);
    return intersection_volume_local(rel.rotation, rel.translation,
                                     dims_a.half(), dims_b.half());
}

double iou3d(const Pose& pose_a, const BoxDims& dims_a, const Pose& pose_b,
             const BoxDims& dims_b) {
    const double inter = box_intersection_volume(pose_a, dims_a, pose_b, dims_b);
    const double uni = dims_a.volume() + dims_b.volume() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double rotation_error_sym(const Mat3& r_pred, const Mat3& r_gt,
                          const BoxDims& dims, double eq_tol) {
    double best = 180.0;
    for (const Mat3& g : box_symmetry_group(dims, eq_tol)) {
        best = std::min(best, geodesic_deg(r_pred * g, r_gt));
    }
    return best;
}

bool pose_true_positive(const Pose& pred, const Pose& gt, const BoxDims& gt_dims,
                        double n_deg, double m_cm) {
    const double rot = rotation_error_sym(pred.rotation, gt.rotation, gt_dims);
    const double trans_cm = (pred.translation - gt.translation).norm() * 100.0;
    return rot <= n_deg && trans_cm <= m_cm;
}

std::vector<int> match_predictions(const std::vector<PredictionForMatch>& preds,
                                   const std::vector<GtForMatch>& gts) {
    std::vector<size_t> order(preds.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return preds[a].confidence > preds[b].confidence;
    });

    std::vector<int> assignment(preds.size(), -1);
    std::vector<bool> taken(gts.size(), false);
    for (size_t oi : order) {
        int best_gt = -1;
        double best_iou = 0.0;
        for (size_t g = 0; g < gts.size(); ++g) {
            if (taken[g]) continue;
            const double v =
                iou3d(preds[oi].pose, preds[oi].dims, gts[g].pose, gts[g].dims);
            if (v > best_iou) {
                best_iou = v;
                best_gt = int(g);
            }
        }
        if (best_gt >= 0) {
            taken[best_gt] = true;
            assignment[oi] = best_gt;
        }
    }
    return assignment;
}

double average_precision(
    const std::vector<InstanceResult>& results,
    const std::function<bool(const InstanceResult&)>& criterion) {
    if (results.empty())
        throw UndefinedMetric("average_precision: empty result set");
    size_t pass = 0;
    for (const auto& r : results) {
        if (r.matched && criterion(r)) ++pass;
    }
    return double(pass) / double(results.size());
}

}  // namespace boxfit
