#include "boxfit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cstdio>
#include <memory>
#include <set>

namespace boxfit {

namespace {

PointCloud subsample(const PointCloud& cloud, int max_points) {
    if (max_points <= 0 || int(cloud.size()) <= max_points) return cloud;
    PointCloud out;
    const size_t stride = (cloud.size() + max_points - 1) / max_points;
    for (size_t i = 0; i < cloud.size(); i += stride) {
        out.points.push_back(cloud.points[i]);
    }
    return out;
}

}  // namespace

PoseEstimator make_pose_estimator(const DepthImage& obs_depth,
                                  const InstanceMask& obs_mask, int instance,
                                  const CameraIntrinsics& K,
                                  const PipelineConfig& cfg) {
    auto cloud = std::make_shared<PointCloud>(
        subsample(backproject(obs_depth, obs_mask, instance, K),
                  cfg.max_cloud_points));

    return [cloud, &obs_depth, &obs_mask, instance, K,
            cfg](const BoxDims& dims, const Pose* warm) -> PoseEstimateResult {
        if (cfg.warm_start && warm != nullptr) {
            const IcpResult r = icp_refine(*cloud, dims, *warm, cfg.icp);
            Hypothesis h;
            h.pose = r.pose;
            PoseEstimateResult out;
            out.pose = r.pose;
            out.confidence = score_hypothesis(h, *cloud, dims, cfg.score_delta);
            out.rmse = r.rmse;
            return out;
        }

        const ObbInit init = obb_init(*cloud);
        std::vector<Hypothesis> hyps = enumerate_hypotheses(init.frame);

        // Seed translations so the box sits behind the visible surface
        // rather than centered on it: a centroid-centered box on a one-face
        // cloud is a saddle for the point-to-cuboid iteration.
        const Vec3 view = init.frame.translation.normalized();
        double span_lo = std::numeric_limits<double>::infinity();
        double span_hi = -span_lo;
        for (const Vec3& p : cloud->points) {
            const double t = view.dot(p);
            span_lo = std::min(span_lo, t);
            span_hi = std::max(span_hi, t);
        }
        const double cloud_span = span_hi - span_lo;
        for (Hypothesis& h : hyps) {
            double box_span = 0.0;
            for (int a = 0; a < 3; ++a) {
                box_span += dims[a] * std::abs(view.dot(h.pose.rotation.col(a)));
            }
            h.pose.translation += view * 0.5 * (box_span - cloud_span);
        }

        IcpConfig coarse = cfg.icp;
        coarse.max_iters = std::min(cfg.hyp_icp_iters, cfg.icp.max_iters);
        for (Hypothesis& h : hyps) {
            const IcpResult r = icp_refine(*cloud, dims, h.pose, coarse);
            h.pose = r.pose;
            h.confidence = score_hypothesis(h, *cloud, dims, cfg.score_delta);
        }

        std::vector<Hypothesis> survivors;
        if (cfg.depth_filter_enabled) {
            survivors = filter_hypotheses(hyps, dims, obs_depth, obs_mask,
                                          instance, K, cfg.filter);
        } else {
            survivors = hyps;
            std::stable_sort(survivors.begin(), survivors.end(),
                             [](const Hypothesis& a, const Hypothesis& b) {
                                 return a.confidence > b.confidence;
                             });
        }

        // Keep the orientation labeling stable across refreshes: a relabeled
        // axis assignment can score higher while the per-axis scales are
        // still wrong, and it would scramble the caller's per-axis
        // bookkeeping. Without a previous iterate the PCA frame anchors the
        // labeling (its column order is a deterministic property of the
        // cloud). Preference order: best filtered survivor inside the gate,
        // then the best-scoring raw hypothesis inside the gate (flagged as a
        // fallback since the filter rejected it), then the best survivor.
        const Mat3 anchor = warm ? warm->rotation : init.frame.rotation;
        auto in_gate = [&](const Hypothesis& h) {
            return geodesic_deg(h.pose.rotation, anchor) <= 30.0;
        };
        Hypothesis pick;
        bool picked = false;
        for (const Hypothesis& h : survivors) {
            if (in_gate(h)) {
                pick = h;
                picked = true;
                break;
            }
        }
        if (!picked) {
            double best_conf = -1.0;
            for (const Hypothesis& h : hyps) {
                if (in_gate(h) && h.confidence > best_conf) {
                    best_conf = h.confidence;
                    pick = h;
                    picked = true;
                }
            }
            if (picked) pick.fallback = true;
        }
        if (!picked) pick = survivors.front();
#ifdef BOXFIT_DEBUG_SELECT
        std::fprintf(stderr, "[select] survivors=%zu fallback=%d pick=%zu conf=%.3f warmdist=%.1f\n",
            survivors.size(), int(pick.fallback), pick_idx, pick.confidence,
            warm ? geodesic_deg(pick.pose.rotation, warm->rotation) : -1.0);
#endif
        const IcpResult fin = icp_refine(*cloud, dims, pick.pose, cfg.icp);
        Hypothesis refined;
        refined.pose = fin.pose;

        PoseEstimateResult out;
        out.pose = fin.pose;
        out.confidence = score_hypothesis(refined, *cloud, dims, cfg.score_delta);
        out.fallback = pick.fallback;
        out.rmse = fin.rmse;
        return out;
    };
}

std::vector<InstancePrediction> estimate_frame(
    const DepthImage& depth, const CameraIntrinsics& K,
    const PipelineConfig& cfg,
    const std::optional<InstanceMask>& external_mask) {
    const InstanceMask mask =
        external_mask ? *external_mask : segment_instances(depth, K, cfg.segment);

    std::set<std::uint8_t> labels;
    for (std::uint8_t v : mask.data) {
        if (v != 0) labels.insert(v);
    }

    std::vector<InstancePrediction> preds;
    for (std::uint8_t label : labels) {
        const auto t0 = std::chrono::steady_clock::now();
        InstancePrediction p;
        p.label = label;
        try {
            const PoseEstimator estimator =
                make_pose_estimator(depth, mask, label, K, cfg);
            DimSearchResult r = estimate_dimensions(depth, mask, label, K,
                                                    estimator, cfg.search);
            p.pose = r.pose;
            p.dims = scaled_template(r.scale);
            p.confidence = r.confidence;
            p.trace = std::move(r.trace);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "instance %d skipped: %s\n", int(label),
                         e.what());
            continue;
        }
        p.wall_time_s = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        preds.push_back(std::move(p));
    }
    return preds;
}

std::vector<InstanceResult> evaluate_scene(
    const Scene& scene, const std::vector<InstancePrediction>& preds,
    int scene_id) {
    std::vector<PredictionForMatch> pm(preds.size());
    for (size_t i = 0; i < preds.size(); ++i) {
        pm[i] = {preds[i].pose, preds[i].dims, preds[i].confidence};
    }
    std::vector<GtForMatch> gm(scene.gt.size());
    for (size_t g = 0; g < scene.gt.size(); ++g) {
        gm[g] = {scene.gt[g].pose, scene.gt[g].dims};
    }
    const std::vector<int> assign = match_predictions(pm, gm);

    std::vector<InstanceResult> rows(scene.gt.size());
    for (size_t g = 0; g < scene.gt.size(); ++g) {
        rows[g].scene_id = scene_id;
        rows[g].gt_id = int(g) + 1;
    }
    for (size_t i = 0; i < preds.size(); ++i) {
        const int g = assign[i];
        if (g < 0) continue;
        InstanceResult& r = rows[g];
        r.matched = true;
        r.iou = iou3d(preds[i].pose, preds[i].dims, scene.gt[g].pose,
                      scene.gt[g].dims);
        r.rot_err_deg = rotation_error_sym(preds[i].pose.rotation,
                                           scene.gt[g].pose.rotation,
                                           scene.gt[g].dims);
        r.trans_err_cm =
            (preds[i].pose.translation - scene.gt[g].pose.translation).norm() *
            100.0;
        r.confidence = preds[i].confidence;
        r.iterations = preds[i].trace.pose_estimates;
        r.wall_time_s = preds[i].wall_time_s;
        r.trace_reason = to_string(preds[i].trace.reason);
    }
    return rows;
}

}  // namespace boxfit
