#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "boxfit/errors.hpp"
#include "boxfit/metrics.hpp"
#include "boxfit/pose.hpp"
#include "boxfit/render.hpp"
#include "boxfit/rng.hpp"
#include "test_util.hpp"

using namespace boxfit;

namespace {

// Surface cloud of a posed box, deterministic grid sampling.
PointCloud box_surface_cloud(const BoxDims& dims, const Pose& pose, int n = 12) {
    PointCloud cloud;
    const Vec3 h = dims.half();
    for (int face = 0; face < 6; ++face) {
        const int axis = face / 2;
        const double side = face % 2 ? 1.0 : -1.0;
        for (int i = 0; i <= n; ++i) {
            for (int j = 0; j <= n; ++j) {
                Vec3 p;
                p[axis] = side * h[axis];
                p[(axis + 1) % 3] = h[(axis + 1) % 3] * (2.0 * i / n - 1.0);
                p[(axis + 2) % 3] = h[(axis + 2) % 3] * (2.0 * j / n - 1.0);
                cloud.points.push_back(pose.apply(p));
            }
        }
    }
    return cloud;
}

}  // namespace

TEST_CASE("backproject principal point and sentinel handling") {
    const CameraIntrinsics K = testutil::vga_camera();
    DepthImage depth(K.width, K.height);
    InstanceMask mask(K.width, K.height);

    // Pixel whose center hits the principal point: cx=320 -> pixel center
    // 320.5 is off by half a pixel, so use a camera with cx at a center.
    CameraIntrinsics K2 = K;
    K2.cx = 320.5;
    K2.cy = 240.5;
    depth.at(320, 240) = 2.0;
    mask.at(320, 240) = 1;
    const PointCloud c = backproject(depth, mask, 1, K2);
    REQUIRE(c.size() == 1);
    CHECK(c.points[0].isApprox(Vec3(0, 0, 2), 1e-12));

    // All-zero depth under the mask -> empty cloud error.
    DepthImage zero(K.width, K.height);
    CHECK_THROWS_AS((void)backproject(zero, mask, 1, K2), EmptyCloud);
}

TEST_CASE("backproject of rendered cube lies on the box surface") {
    const CameraIntrinsics K = testutil::vga_camera();
    const BoxDims dims{0.4, 0.3, 0.5};
    Rng rng(3);
    Pose pose;
    pose.rotation = testutil::random_rotation(rng);
    pose.translation = Vec3(0.05, -0.1, 1.7);
    const RenderedView v = render_view(dims, pose, K);
    const PointCloud cloud = backproject(v.depth, v.mask, 1, K);
    REQUIRE(cloud.size() > 1000);
    for (const Vec3& p : cloud.points) {
        CHECK(box_surface_distance(p, dims, pose) < 1e-6);
    }
}

TEST_CASE("obb_init recovers an axis-aligned cloud frame") {
    Rng rng(17);
    const BoxDims dims{0.5, 0.3, 0.2};
    const Pose id = Pose::identity();
    PointCloud cloud = box_surface_cloud(dims, id);
    const ObbInit init = obb_init(cloud);
    CHECK(init.frame.translation.norm() < 1e-9);
    CHECK(rotation_error_sym(init.frame.rotation, Mat3::Identity(), dims) <
          5.0);
    CHECK(init.half_extents.maxCoeff() ==
          doctest::Approx(dims.half().maxCoeff()).epsilon(0.05));

    // Equivariance: rotating the cloud rotates the frame, modulo symmetry.
    Pose rot;
    rot.rotation = testutil::random_rotation(rng);
    PointCloud rotated;
    for (const Vec3& p : cloud.points) rotated.points.push_back(rot.apply(p));
    const ObbInit init2 = obb_init(rotated);
    CHECK(rotation_error_sym(init2.frame.rotation,
                             rot.rotation * init.frame.rotation, dims) < 5.0);
}

TEST_CASE("obb_init preconditions") {
    PointCloud tiny;
    for (int i = 0; i < 5; ++i) tiny.points.emplace_back(i, 0, 0);
    CHECK_THROWS_AS((void)obb_init(tiny), DegenerateCloud);

    PointCloud line;
    for (int i = 0; i < 50; ++i) line.points.emplace_back(i * 0.01, 0, 0);
    CHECK_THROWS_AS((void)obb_init(line), DegenerateCloud);
}

TEST_CASE("enumerate_hypotheses yields the 24 octahedral rotations") {
    Rng rng(23);
    Pose frame = testutil::random_pose(rng);
    const auto hyps = enumerate_hypotheses(frame);
    REQUIRE(hyps.size() == 24);

    // Composing with the frame inverse recovers signed permutation matrices.
    std::set<std::string> seen;
    for (const Hypothesis& h : hyps) {
        CHECK((h.pose.translation - frame.translation).norm() == 0.0);
        const Mat3 g = frame.rotation.transpose() * h.pose.rotation;
        std::string key;
        for (int i = 0; i < 9; ++i) {
            const double v = g(i / 3, i % 3);
            CHECK(std::abs(v - std::round(v)) < 1e-9);
            key += std::to_string(int(std::round(v))) + ",";
        }
        seen.insert(key);
        CHECK(std::abs(g.determinant() - 1.0) < 1e-9);
    }
    CHECK(seen.size() == 24);  // pairwise distinct

    // Pairwise geodesic distance >= 90 degrees (up to numerical slack).
    for (size_t i = 0; i < hyps.size(); ++i) {
        for (size_t j = i + 1; j < hyps.size(); ++j) {
            CHECK(geodesic_deg(hyps[i].pose.rotation, hyps[j].pose.rotation) >
                  90.0 - 1e-6);
        }
    }

    // Closure: applying the enumeration to any member reproduces the set.
    const auto again = enumerate_hypotheses(hyps[7].pose);
    std::set<std::string> keys2;
    for (const Hypothesis& h : again) {
        const Mat3 g = frame.rotation.transpose() * h.pose.rotation;
        std::string key;
        for (int i = 0; i < 9; ++i) {
            key += std::to_string(int(std::round(g(i / 3, i % 3)))) + ",";
        }
        keys2.insert(key);
    }
    CHECK(keys2 == seen);
}

TEST_CASE("hypothesis set is closed under the box symmetry subgroup") {
    Rng rng(29);
    Pose frame = testutil::random_pose(rng);
    const auto hyps = enumerate_hypotheses(frame);
    const BoxDims dims{0.3, 0.3, 0.6};
    for (const Hypothesis& h : hyps) {
        for (const Mat3& g : box_symmetry_group(dims)) {
            const Mat3 equiv = h.pose.rotation * g;
            bool found = false;
            for (const Hypothesis& other : hyps) {
                if ((other.pose.rotation - equiv).cwiseAbs().maxCoeff() < 1e-9) {
                    found = true;
                    break;
                }
            }
            CHECK(found);
        }
    }
}

TEST_CASE("kabsch exactness") {
    Rng rng(41);
    PointCloud src;
    for (int i = 0; i < 30; ++i) {
        src.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                rng.uniform(-1, 1));
    }
    CHECK(geodesic_deg(kabsch(src, src).rotation, Mat3::Identity()) < 1e-9);

    for (int trial = 0; trial < 100; ++trial) {
        const Pose t = testutil::random_pose(rng);
        PointCloud dst;
        for (const Vec3& p : src.points) dst.points.push_back(t.apply(p));
        const Pose est = kabsch(src, dst);
        CHECK(geodesic_deg(est.rotation, t.rotation) < 1e-7);
        CHECK((est.translation - t.translation).norm() < 1e-9);
    }
}

TEST_CASE("kabsch under noise: Monte-Carlo rotation error") {
    Rng rng(43);
    int ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
        PointCloud src;
        for (int i = 0; i < 500; ++i) {
            src.points.emplace_back(rng.uniform(-0.3, 0.3),
                                    rng.uniform(-0.3, 0.3),
                                    rng.uniform(-0.3, 0.3));
        }
        const Pose t = testutil::random_pose(rng);
        PointCloud dst;
        for (const Vec3& p : src.points) {
            dst.points.push_back(t.apply(p) + Vec3(rng.normal(0, 1e-3),
                                                   rng.normal(0, 1e-3),
                                                   rng.normal(0, 1e-3)));
        }
        if (geodesic_deg(kabsch(src, dst).rotation, t.rotation) < 0.5) ++ok;
    }
    CHECK(ok == 100);
}

TEST_CASE("kabsch degenerate input") {
    PointCloud a, b;
    for (int i = 0; i < 10; ++i) {
        a.points.emplace_back(i, 0, 0);
        b.points.emplace_back(0, i, 0);
    }
    CHECK_THROWS_AS((void)kabsch(a, b), RankError);
    PointCloud two;
    two.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    CHECK_THROWS_AS((void)kabsch(two, two), RankError);
}

TEST_CASE("icp fixed point at ground truth") {
    const CameraIntrinsics K = testutil::vga_camera();
    const BoxDims dims{0.4, 0.25, 0.3};
    Rng rng(47);
    Pose gt;
    gt.rotation = testutil::random_rotation(rng);
    gt.translation = Vec3(0.05, 0.0, 1.6);
    const RenderedView v = render_view(dims, gt, K);
    const PointCloud cloud = backproject(v.depth, v.mask, 1, K);

    const IcpResult r = icp_refine(cloud, dims, gt);
    CHECK(r.converged);
    CHECK(r.rmse < 1e-6);
    CHECK(geodesic_deg(r.pose.rotation, gt.rotation) < 1e-5);
    CHECK((r.pose.translation - gt.translation).norm() < 1e-6);
}

TEST_CASE("icp converges from a perturbed init") {
    const CameraIntrinsics K = testutil::vga_camera();
    const BoxDims dims{0.4, 0.25, 0.3};
    Rng rng(53);
    Pose gt;
    gt.rotation = testutil::random_rotation(rng);
    gt.translation = Vec3(0.0, 0.0, 1.6);
    const RenderedView v = render_view(dims, gt, K);
    const PointCloud cloud = backproject(v.depth, v.mask, 1, K);

    Pose init = gt;
    init.rotation =
        Eigen::AngleAxisd(10.0 * M_PI / 180.0, Vec3(1, 1, 0).normalized())
            .toRotationMatrix() *
        gt.rotation;
    init.translation += Vec3(0.02, -0.01, 0.005);

    const IcpResult r = icp_refine(cloud, dims, init);
    CHECK(rotation_error_sym(r.pose.rotation, gt.rotation, dims) < 0.5);
    CHECK((r.pose.translation - gt.translation).norm() < 0.002);

    PointCloud empty;
    CHECK_THROWS_AS((void)icp_refine(empty, dims, gt), EmptyCloud);
}

TEST_CASE("closest_point_on_box handles inside and outside") {
    const Vec3 h(0.5, 0.5, 0.5);
    CHECK(closest_point_on_box(Vec3(2, 0, 0), h).isApprox(Vec3(0.5, 0, 0)));
    CHECK(closest_point_on_box(Vec3(0.4, 0.1, 0), h)
              .isApprox(Vec3(0.5, 0.1, 0)));
    const Vec3 corner = closest_point_on_box(Vec3(1, 1, 1), h);
    CHECK(corner.isApprox(Vec3(0.5, 0.5, 0.5)));
}

TEST_CASE("score_hypothesis inlier fraction") {
    const CameraIntrinsics K = testutil::vga_camera();
    const BoxDims dims{0.3, 0.3, 0.3};
    Pose gt;
    gt.translation = Vec3(0, 0, 1.5);
    const RenderedView v = render_view(dims, gt, K);
    const PointCloud cloud = backproject(v.depth, v.mask, 1, K);

    Hypothesis at_gt;
    at_gt.pose = gt;
    CHECK(score_hypothesis(at_gt, cloud, dims) == doctest::Approx(1.0));

    Hypothesis far;
    far.pose = gt;
    far.pose.translation += Vec3(0.5, 0, 0);
    CHECK(score_hypothesis(far, cloud, dims) < 0.1);

    PointCloud empty;
    CHECK(score_hypothesis(at_gt, empty, dims) == 0.0);
}
