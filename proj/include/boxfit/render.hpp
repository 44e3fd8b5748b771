#pragma once

#include <array>

#include "boxfit/types.hpp"

namespace boxfit {

// Depth and silhouette of a box rendered in isolation. The mask is nonzero
// exactly where depth > 0.
struct RenderedView {
    DepthImage depth;
    InstanceMask mask;
};

// Pixel extents of a mask along the image directions of the three box axes.
// An axis whose projected direction degenerates (axis near the viewing ray)
// is flagged unobservable; its extent and direction are meaningless.
struct AxisExtents {
    Vec3 e = Vec3::Zero();
    std::array<bool, 3> observable{false, false, false};
    std::array<Vec2, 3> dir{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
};

// Pinhole projection to continuous pixel coordinates. Throws BehindCamera
// when p.z <= 0.
Vec2 project_point(const CameraIntrinsics& K, const Vec3& p);

// Local corners of the box, index bit 0/1/2 selects +x/+y/+z.
std::array<Vec3, 8> box_corners(const BoxDims& dims);

// Z-buffered rasterization of the 12-triangle box mesh. Pixels are sampled
// at centers with a top-left fill convention; depth is the camera-frame z of
// the nearest surface. A box fully outside the frustum yields an empty view.
RenderedView render_view(const BoxDims& dims, const Pose& pose,
                         const CameraIntrinsics& K);

// Extent of `mask` pixels (label == instance, or any nonzero for instance 0)
// along the projected axis directions of the box (dims, pose). The direction
// of axis a is measured between the projections of center +/- half-dim; if
// those coincide within 1e-3 px the axis is unobservable. Throws EmptyMask.
AxisExtents extents(const InstanceMask& mask, int instance, const BoxDims& dims,
                    const Pose& pose, const CameraIntrinsics& K);

// max - min depth over labeled pixels with depth > 0; 0 when fewer than two.
double depth_span(const DepthImage& depth, const InstanceMask& mask,
                  int instance);

}  // namespace boxfit
