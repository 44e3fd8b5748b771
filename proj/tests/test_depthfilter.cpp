#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "boxfit/depthfilter.hpp"
#include "boxfit/errors.hpp"
#include "boxfit/metrics.hpp"
#include "boxfit/pose.hpp"
#include "boxfit/render.hpp"
#include "boxfit/rng.hpp"
#include "boxfit/scenegen.hpp"
#include "test_util.hpp"

using namespace boxfit;

namespace {

SceneConfig stacked_config(std::uint64_t seed) {
    SceneConfig cfg;
    cfg.seed = seed;
    cfg.n_boxes = 2;
    cfg.layout = StackLayout::Stack;
    cfg.dims_min = Vec3(0.25, 0.18, 0.25);
    cfg.dims_max = Vec3(0.5, 0.3, 0.45);
    cfg.view.pitch_deg_min = 14.0;
    cfg.view.pitch_deg_max = 22.0;
    return cfg;
}

}  // namespace

TEST_CASE("gt pose is self-consistent") {
    const SceneConfig cfg = stacked_config(808);
    const Scene scene = generate_scene(cfg);

    for (size_t i = 0; i < scene.gt.size(); ++i) {
        Hypothesis h;
        h.pose = scene.gt[i].pose;
        const DepthStats s = depth_stats(h, scene.gt[i].dims, scene.depth,
                                         scene.masks, int(i) + 1, scene.camera);
        CHECK(s.median_abs_residual <= 1e-3);  // mm quantization floor
        CHECK(s.protrusion_fraction == doctest::Approx(0.0));
        CHECK(s.coverage > 0.3);
    }
}

TEST_CASE("hover pose is caught by the protrusion fraction") {
    const SceneConfig cfg = stacked_config(809);
    const Scene scene = generate_scene(cfg);
    const FilterConfig fc;

    const Instance& inst = scene.gt[1];
    Hypothesis hover;
    hover.pose = inst.pose;
    // Lift toward the camera by 2 * tau_d along the ray.
    hover.pose.translation -=
        inst.pose.translation.normalized() * (2.0 * fc.tau_d);

    const DepthStats s = depth_stats(hover, inst.dims, scene.depth, scene.masks,
                                     2, scene.camera, fc.tau_d);
    CHECK(s.protrusion_fraction > 0.9);
}

TEST_CASE("wrong 90-degree rotation of an elongated box fails the residual") {
    SceneConfig cfg;
    cfg.seed = 810;
    cfg.n_boxes = 1;
    cfg.dims_min = Vec3(0.199, 0.199, 0.599);
    cfg.dims_max = Vec3(0.2, 0.2, 0.6);
    const Scene scene = generate_scene(cfg);
    const Instance& inst = scene.gt[0];

    // Swap the long axis into a short one.
    Hypothesis wrong;
    wrong.pose = inst.pose;
    wrong.pose.rotation =
        inst.pose.rotation *
        Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitX()).toRotationMatrix();

    const FilterConfig fc;
    const DepthStats s = depth_stats(wrong, inst.dims, scene.depth, scene.masks,
                                     1, scene.camera, fc.tau_d);
    const bool rejected = s.median_abs_residual > fc.max_median_residual ||
                          s.protrusion_fraction > fc.max_protrusion ||
                          s.coverage < fc.min_coverage;
    CHECK(rejected);
}

TEST_CASE("empty comparison domain yields the documented sentinel") {
    const CameraIntrinsics K = testutil::vga_camera();
    DepthImage depth(K.width, K.height);
    InstanceMask mask(K.width, K.height);
    Hypothesis h;
    h.pose.translation = Vec3(0, 0, 2);
    const DepthStats s =
        depth_stats(h, BoxDims{0.3, 0.3, 0.3}, depth, mask, 1, K);
    CHECK(s.coverage == 0.0);
    CHECK(std::isinf(s.median_abs_residual));
}

TEST_CASE("octahedral survivors on an asymmetric box are symmetry-equivalent") {
    SceneConfig cfg;
    cfg.seed = 811;
    cfg.n_boxes = 1;
    cfg.dims_min = Vec3(0.2, 0.3, 0.45);
    cfg.dims_max = Vec3(0.21, 0.31, 0.46);
    cfg.view.pitch_deg_min = 25.0;
    cfg.view.pitch_deg_max = 32.0;
    const Scene scene = generate_scene(cfg);
    const Instance& inst = scene.gt[0];

    // Hypotheses: octahedral rotations around the gt frame itself.
    std::vector<Hypothesis> hs = enumerate_hypotheses(inst.pose);
    const auto kept = filter_hypotheses(hs, inst.dims, scene.depth, scene.masks,
                                        1, scene.camera, FilterConfig{});
    REQUIRE(!kept.empty());
    CHECK(kept.size() < hs.size());  // wrong rotations are discarded
    for (const Hypothesis& h : kept) {
        CHECK_FALSE(h.fallback);
        REQUIRE(h.depth_stats.has_value());
        CHECK(rotation_error_sym(h.pose.rotation, inst.pose.rotation,
                                 inst.dims) < 1.0);
    }
}

TEST_CASE("gt-only input passes unchanged") {
    const SceneConfig cfg = stacked_config(812);
    const Scene scene = generate_scene(cfg);
    std::vector<Hypothesis> hs(1);
    hs[0].pose = scene.gt[0].pose;
    hs[0].confidence = 0.9;
    const auto kept = filter_hypotheses(hs, scene.gt[0].dims, scene.depth,
                                        scene.masks, 1, scene.camera,
                                        FilterConfig{});
    REQUIRE(kept.size() == 1);
    CHECK_FALSE(kept[0].fallback);
    CHECK(kept[0].confidence == 0.9);
}

TEST_CASE("all-rejected input falls back to the best residual, flagged") {
    const SceneConfig cfg = stacked_config(813);
    const Scene scene = generate_scene(cfg);

    std::vector<Hypothesis> hs;
    for (double off : {0.5, 0.8, 1.2}) {
        Hypothesis h;
        h.pose = scene.gt[0].pose;
        h.pose.translation += Vec3(off, 0, 0);
        hs.push_back(h);
    }
    const auto kept = filter_hypotheses(hs, scene.gt[0].dims, scene.depth,
                                        scene.masks, 1, scene.camera,
                                        FilterConfig{});
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].fallback);

    CHECK_THROWS_AS((void)filter_hypotheses({}, scene.gt[0].dims, scene.depth,
                                            scene.masks, 1, scene.camera,
                                            FilterConfig{}),
                    InvalidArgument);
}

TEST_CASE("filter output set is input-order invariant") {
    const SceneConfig cfg = stacked_config(814);
    const Scene scene = generate_scene(cfg);
    std::vector<Hypothesis> hs = enumerate_hypotheses(scene.gt[0].pose);
    for (size_t i = 0; i < hs.size(); ++i) {
        hs[i].confidence = 0.2 + 0.01 * double(i % 7);
    }

    const auto kept1 = filter_hypotheses(hs, scene.gt[0].dims, scene.depth,
                                         scene.masks, 1, scene.camera,
                                         FilterConfig{});
    std::vector<Hypothesis> shuffled = hs;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto kept2 = filter_hypotheses(shuffled, scene.gt[0].dims,
                                         scene.depth, scene.masks, 1,
                                         scene.camera, FilterConfig{});
    REQUIRE(kept1.size() == kept2.size());
    // Same set of rotations, regardless of input order.
    for (const Hypothesis& a : kept1) {
        bool found = false;
        for (const Hypothesis& b : kept2) {
            if ((a.pose.rotation - b.pose.rotation).cwiseAbs().maxCoeff() <
                1e-12) {
                found = true;
                break;
            }
        }
        CHECK(found);
    }
    // Documented ordering: non-increasing confidence.
    for (size_t i = 1; i < kept1.size(); ++i) {
        CHECK(kept1[i - 1].confidence >= kept1[i].confidence);
    }
}
