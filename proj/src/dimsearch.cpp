#include "boxfit/dimsearch.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "boxfit/metrics.hpp"

namespace boxfit {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Boundary pixels of the labeled region (any 4-neighbor differs).
std::vector<Vec2> mask_boundary(const InstanceMask& mask, int instance) {
    std::vector<Vec2> pts;
    auto labeled = [&](int x, int y) {
        if (x < 0 || x >= mask.width || y < 0 || y >= mask.height) return false;
        const std::uint8_t v = mask.at(x, y);
        return instance == 0 ? v != 0 : v == instance;
    };
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!labeled(x, y)) continue;
            if (!labeled(x - 1, y) || !labeled(x + 1, y) || !labeled(x, y - 1) ||
                !labeled(x, y + 1)) {
                pts.emplace_back(x + 0.5, y + 0.5);
            }
        }
    }
    return pts;
}

// Andrew monotone chain; returns hull vertices counter-clockwise.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    if (pts.size() < 3) return pts;
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
        return (a.x() - o.x()) * (b.y() - o.y()) -
               (a.y() - o.y()) * (b.x() - o.x());
    };
    std::vector<Vec2> hull(2 * pts.size());
    size_t k = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    const size_t lower = k + 1;
    for (size_t i = pts.size() - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k > 1 ? k - 1 : k);
    return hull;
}

// Dominant boundary edge directions of the mask (angles mod pi), longest
// hull edges first, short bevels dropped.
struct EdgeDir {
    Vec2 dir;
    double length;
};
std::vector<EdgeDir> dominant_directions(const InstanceMask& mask,
                                         int instance) {
    const std::vector<Vec2> hull = convex_hull(mask_boundary(mask, instance));
    std::vector<EdgeDir> edges;
    if (hull.size() < 2) return edges;
    double perimeter = 0.0;
    for (size_t i = 0; i < hull.size(); ++i) {
        perimeter += (hull[(i + 1) % hull.size()] - hull[i]).norm();
    }
    const double min_len = std::max(3.0, 0.03 * perimeter);
    for (size_t i = 0; i < hull.size(); ++i) {
        const Vec2 d = hull[(i + 1) % hull.size()] - hull[i];
        const double len = d.norm();
        if (len < min_len) continue;
        edges.push_back({d / len, len});
    }
    std::sort(edges.begin(), edges.end(),
              [](const EdgeDir& a, const EdgeDir& b) {
                  return a.length > b.length;
              });
    return edges;
}

double angle_mod_pi_deg(const Vec2& a, const Vec2& b) {
    const double c = std::clamp(std::abs(a.dot(b)), 0.0, 1.0);
    return std::acos(c) * 180.0 / kPi;
}

}  // namespace

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::ExtentConverged: return "extent-converged";
        case StopReason::IntervalConverged: return "interval-converged";
        case StopReason::MaxIters: return "max-iters";
        case StopReason::EarlyStopped: return "early-stopped";
    }
    return "unknown";
}

bool axes_aligned_around_vertex(const BoxDims& dims, const Pose& pose,
                                const Pose& prev_pose,
                                const InstanceMask& obs_mask, int instance,
                                const CameraIntrinsics& K, double tol_deg) {
    // (a) rotation stabilized between consecutive refreshes.
    if (rotation_error_sym(pose.rotation, prev_pose.rotation, dims) > tol_deg)
        return false;

    // (b) edges at the vertex nearest the camera line up with the observed
    // mask's dominant boundary directions.
    const auto corners = box_corners(dims);
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    std::array<Vec3, 8> cam;
    for (int i = 0; i < 8; ++i) {
        cam[i] = pose.apply(corners[i]);
        const double d = cam[i].norm();
        if (d < best) {
            best = d;
            nearest = i;
        }
    }
    if (cam[nearest].z() <= 0.0) return false;

    const std::vector<EdgeDir> obs_dirs = dominant_directions(obs_mask, instance);
    if (obs_dirs.empty()) return false;

    // Edges shorter than this on screen constrain nothing.
    double perimeter = 0.0;
    for (const EdgeDir& od : obs_dirs) perimeter += od.length;
    const double min_edge_px = std::max(6.0, 0.03 * perimeter);

    const Vec2 pv = project_point(K, cam[nearest]);
    std::vector<Vec2> visible_edges;
    for (int a = 0; a < 3; ++a) {
        const int adj = nearest ^ (1 << a);
        if (cam[adj].z() <= 0.0) return false;
        const Vec2 pa = project_point(K, cam[adj]);
        Vec2 edge = pa - pv;
        const double len = edge.norm();
        if (len < min_edge_px) continue;  // foreshortened away
        edge /= len;
        bool matched = false;
        for (const EdgeDir& od : obs_dirs) {
            if (angle_mod_pi_deg(edge, od.dir) <= tol_deg) {
                matched = true;
                break;
            }
        }
        if (!matched) return false;
        visible_edges.push_back(edge);
    }
    if (visible_edges.size() < 2) return false;

    // The one-step rescale needs decoupled axes: visible edges must project
    // to a right-angled corner.
    for (size_t i = 0; i < visible_edges.size(); ++i) {
        for (size_t j = i + 1; j < visible_edges.size(); ++j) {
            const double ang =
                angle_mod_pi_deg(visible_edges[i], visible_edges[j]);
            if (std::abs(ang - 90.0) > tol_deg) return false;
        }
    }
    return true;
}

ScaleVec proportional_update(const ScaleVec& s, const AxisExtents& e_obs,
                             const AxisExtents& e_cad) {
    Vec3 out = s.vec();
    for (int a = 0; a < 3; ++a) {
        if (!e_cad.observable[a] || !e_obs.observable[a]) continue;
        if (e_cad.e[a] <= 0.0)
            throw DegenerateExtent(
                "proportional_update: zero rendered extent on observable axis");
        if (e_obs.e[a] <= 0.0) continue;  // no observed signal; keep the scale
        out[a] = s[a] * (e_obs.e[a] / e_cad.e[a]);
    }
    return ScaleVec::from(out);
}

namespace {

DimSearchResult run_search(const DepthImage& obs_depth,
                           const InstanceMask& obs_mask, int instance,
                           const CameraIntrinsics& K,
                           const PoseEstimator& pose_estimator,
                           const SearchConfig& cfg, bool early_stop) {
    if (cfg.t_max < 1 || cfg.tau_px <= 0.0 || !cfg.bounds_init.valid())
        throw InvalidArgument("dimension search: invalid config");
    if (obs_mask.count(instance) == 0)
        throw EmptyMask("dimension search: instance absent from mask");

    const auto t_start = std::chrono::steady_clock::now();

    Vec3 lo = cfg.bounds_init.lo;
    Vec3 hi = cfg.bounds_init.hi;
    // Unit start, except where the bracket excludes it (a deployment prior
    // on that axis); then start mid-bracket.
    Vec3 s0 = Vec3::Ones();
    for (int a = 0; a < 3; ++a) {
        if (s0[a] < lo[a] || s0[a] > hi[a]) s0[a] = 0.5 * (lo[a] + hi[a]);
    }
    ScaleVec s = ScaleVec::from(s0);

    DimSearchResult result;
    SearchTrace& trace = result.trace;

    Pose pose;
    Pose prev_pose;
    bool have_prev = false;
    double confidence = 0.0;

    auto finish = [&](StopReason reason) {
        trace.reason = reason;
        trace.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t_start)
                .count();
        result.scale = s;
        result.pose = pose;
        result.confidence = confidence;
        return result;
    };

    for (int t = 1; t <= cfg.t_max; ++t) {
        const BoxDims dims = scaled_template(s);

        PoseEstimateResult pe;
        try {
            pe = pose_estimator(dims, have_prev ? &prev_pose : nullptr);
        } catch (const std::exception& e) {
            trace.wall_time_s = std::chrono::duration<double>(
                                    std::chrono::steady_clock::now() - t_start)
                                    .count();
            throw DimSearchFailure(
                std::string("pose estimation failed: ") + e.what(), trace);
        }
        ++trace.pose_estimates;
        trace.any_fallback = trace.any_fallback || pe.fallback;
        pose = pe.pose;
        confidence = pe.confidence;

        const RenderedView view = render_view(dims, pose, K);

        SearchIterRecord rec;
        rec.iter = t;
        rec.s = s;
        rec.lo = lo;
        rec.hi = hi;
        rec.pose = pose;
        rec.rot_change_deg =
            have_prev ? geodesic_deg(pose.rotation, prev_pose.rotation) : 0.0;

        AxisExtents e_cad;
        bool rendered_visible = true;
        try {
            e_cad = extents(view.mask, 0, dims, pose, K);
        } catch (const EmptyMask&) {
            rendered_visible = false;  // treated as all-underfill below
        }
        const AxisExtents e_obs = extents(obs_mask, instance, dims, pose, K);

        rec.e_cad = e_cad.e;
        rec.e_obs = e_obs.e;
        rec.observable = e_cad.observable;

        // Convergence on extent error over observable axes.
        double err = 0.0;
        bool any_observable = false;
        for (int a = 0; a < 3; ++a) {
            if (!rendered_visible || !e_cad.observable[a]) continue;
            any_observable = true;
            err = std::max(err, std::abs(e_cad.e[a] - e_obs.e[a]));
        }
        if (rendered_visible && any_observable && err <= cfg.tau_px) {
            trace.iters.push_back(rec);
            return finish(StopReason::ExtentConverged);
        }
        if ((hi - lo).maxCoeff() < cfg.tau_scale) {
            trace.iters.push_back(rec);
            return finish(StopReason::IntervalConverged);
        }

        if (early_stop && have_prev && t < cfg.t_max && rendered_visible &&
            axes_aligned_around_vertex(dims, pose, prev_pose, obs_mask,
                                       instance, K,
                                       cfg.vertex_align_tol_deg)) {
            s = proportional_update(s, e_obs, e_cad);
            trace.iters.push_back(rec);

            const BoxDims final_dims = scaled_template(s);
            PoseEstimateResult pe2;
            try {
                pe2 = pose_estimator(final_dims, &pose);
            } catch (const std::exception& e) {
                trace.wall_time_s =
                    std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t_start)
                        .count();
                throw DimSearchFailure(
                    std::string("pose estimation failed: ") + e.what(), trace);
            }
            ++trace.pose_estimates;
            trace.any_fallback = trace.any_fallback || pe2.fallback;

            SearchIterRecord fin;
            fin.iter = t + 1;
            fin.s = s;
            fin.lo = lo;
            fin.hi = hi;
            fin.pose = pe2.pose;
            fin.rot_change_deg = geodesic_deg(pe2.pose.rotation, pose.rotation);
            trace.iters.push_back(fin);

            pose = pe2.pose;
            confidence = pe2.confidence;
            return finish(StopReason::EarlyStopped);
        }

        // Bound updates. On the extent path ties (m == 0) count as overfill,
        // shrinking toward smaller boxes. Unobservable axes fall back to the
        // depth-span sign; span differences inside the noise floor freeze the
        // axis for this iteration.
        double span_obs = 0.0, span_cad = 0.0;
        bool spans_ready = false;
        Vec3 next;
        for (int a = 0; a < 3; ++a) {
            if (rendered_visible && e_cad.observable[a]) {
                const double m = e_obs.e[a] - e_cad.e[a];
                if (m > 0.0) {
                    lo[a] = s[a];
                    rec.decision[a] = 'g';
                } else {
                    hi[a] = s[a];
                    rec.decision[a] = 's';
                }
            } else if (!rendered_visible) {
                lo[a] = s[a];  // nothing rendered on screen: grow
                rec.decision[a] = 'g';
            } else {
                if (!spans_ready) {
                    span_obs = depth_span(obs_depth, obs_mask, instance);
                    span_cad = depth_span(view.depth, view.mask, 0);
                    spans_ready = true;
                }
                const double m = span_obs - span_cad;
                if (std::abs(m) <= cfg.span_tol) {
                    rec.decision[a] = 'f';  // no signal, hold the interval
                } else if (m > 0.0) {
                    lo[a] = s[a];
                    rec.decision[a] = 'G';
                } else {
                    hi[a] = s[a];
                    rec.decision[a] = 'S';
                }
            }
            next[a] = 0.5 * (lo[a] + hi[a]);
        }
        trace.iters.push_back(rec);
        s = ScaleVec::from(next);
        prev_pose = pose;
        have_prev = true;
    }

    return finish(StopReason::MaxIters);
}

}  // namespace

DimSearchResult binary_search_dims(const DepthImage& obs_depth,
                                   const InstanceMask& obs_mask, int instance,
                                   const CameraIntrinsics& K,
                                   const PoseEstimator& pose_estimator,
                                   const SearchConfig& cfg) {
    return run_search(obs_depth, obs_mask, instance, K, pose_estimator, cfg,
                      false);
}

DimSearchResult estimate_dimensions(const DepthImage& obs_depth,
                                    const InstanceMask& obs_mask, int instance,
                                    const CameraIntrinsics& K,
                                    const PoseEstimator& pose_estimator,
                                    const SearchConfig& cfg) {
    return run_search(obs_depth, obs_mask, instance, K, pose_estimator, cfg,
                      cfg.early_stop_enabled);
}

}  // namespace boxfit
