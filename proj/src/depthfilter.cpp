#include "boxfit/depthfilter.hpp"

#include <algorithm>
#include <limits>

#include "boxfit/errors.hpp"
#include "boxfit/render.hpp"

namespace boxfit {

DepthStats depth_stats(const Hypothesis& h, const BoxDims& dims,
                       const DepthImage& obs_depth, const InstanceMask& obs_mask,
                       int instance, const CameraIntrinsics& K, double tau_d) {
    const RenderedView view = render_view(dims, h.pose, K);

    size_t rendered = 0;
    size_t protruding = 0;
    std::vector<double> abs_residuals;
    for (int y = 0; y < K.height; ++y) {
        for (int x = 0; x < K.width; ++x) {
            if (view.mask.at(x, y) == 0) continue;
            ++rendered;
            const std::uint8_t v = obs_mask.at(x, y);
            if (instance == 0 ? v == 0 : v != instance) continue;
            const double obs = obs_depth.at(x, y);
            if (obs <= 0.0) continue;
            const double r = view.depth.at(x, y) - obs;
            abs_residuals.push_back(std::abs(r));
            if (r < -tau_d) ++protruding;
        }
    }

    DepthStats stats;
    if (abs_residuals.empty() || rendered == 0) {
        stats.coverage = 0.0;
        stats.protrusion_fraction = 0.0;
        stats.median_abs_residual = std::numeric_limits<double>::infinity();
        return stats;
    }

    stats.coverage = double(abs_residuals.size()) / double(rendered);
    stats.protrusion_fraction =
        double(protruding) / double(abs_residuals.size());

    const size_t mid = abs_residuals.size() / 2;
    std::nth_element(abs_residuals.begin(), abs_residuals.begin() + mid,
                     abs_residuals.end());
    double med = abs_residuals[mid];
    if (abs_residuals.size() % 2 == 0) {
        const double lower = *std::max_element(abs_residuals.begin(),
                                               abs_residuals.begin() + mid);
        med = 0.5 * (med + lower);
    }
    stats.median_abs_residual = med;
    return stats;
}

std::vector<Hypothesis> filter_hypotheses(const std::vector<Hypothesis>& hs,
                                          const BoxDims& dims,
                                          const DepthImage& obs_depth,
                                          const InstanceMask& obs_mask,
                                          int instance,
                                          const CameraIntrinsics& K,
                                          const FilterConfig& cfg) {
    if (hs.empty())
        throw InvalidArgument("filter_hypotheses: empty hypothesis list");

    std::vector<Hypothesis> scored = hs;
    for (Hypothesis& h : scored) {
        h.depth_stats =
            depth_stats(h, dims, obs_depth, obs_mask, instance, K, cfg.tau_d);
    }

    std::vector<Hypothesis> kept;
    for (const Hypothesis& h : scored) {
        const DepthStats& s = *h.depth_stats;
        if (s.median_abs_residual <= cfg.max_median_residual &&
            s.protrusion_fraction <= cfg.max_protrusion &&
            s.coverage >= cfg.min_coverage) {
            kept.push_back(h);
        }
    }

    if (kept.empty()) {
        // Keep the pipeline total: surface the least depth-inconsistent
        // candidate and let the caller count it.
        size_t best = 0;
        for (size_t i = 1; i < scored.size(); ++i) {
            if (scored[i].depth_stats->median_abs_residual <
                scored[best].depth_stats->median_abs_residual) {
                best = i;
            }
        }
        Hypothesis h = scored[best];
        h.fallback = true;
        return {h};
    }

    std::stable_sort(kept.begin(), kept.end(),
                     [](const Hypothesis& a, const Hypothesis& b) {
                         return a.confidence > b.confidence;
                     });
    return kept;
}

}  // namespace boxfit
