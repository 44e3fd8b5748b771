#pragma once

#include <filesystem>
#include <vector>

#include "boxfit/types.hpp"

namespace boxfit {

enum class StackLayout { Single, Stack, Pile };

// Camera placement ranges: the camera orbits the scene centroid at a
// sampled distance, pitched down by a sampled angle.
struct ViewConfig {
    double pitch_deg_min = 12.0;
    double pitch_deg_max = 30.0;
    double dist_min = 1.6;
    double dist_max = 2.4;
    double cam_yaw_deg_min = -10.0;
    double cam_yaw_deg_max = 10.0;
    double box_yaw_deg_min = -180.0;
    double box_yaw_deg_max = 180.0;
};

struct SceneConfig {
    int n_boxes = 1;
    Vec3 dims_min = Vec3(0.1, 0.1, 0.1);  // meters, per axis
    Vec3 dims_max = Vec3(0.6, 0.6, 0.6);
    StackLayout layout = StackLayout::Single;
    double occlusion_level = 0.0;  // 0 spread out .. 1 tightly packed
    double depth_noise_sigma = 0.0;  // meters; 0 disables noise and dropout
    CameraIntrinsics camera{570.0, 570.0, 320.0, 240.0, 640, 480};
    std::uint64_t seed = 0;
    ViewConfig view;
    double tilt_deg_max = 10.0;  // pile only
    double far_clip = 8.0;
    double min_stack_setback = 0.03;  // front-face stagger between neighbors

    bool valid() const;
};

struct Instance {
    Pose pose;      // box frame in camera frame
    BoxDims dims;
};

struct Scene {
    DepthImage depth;      // millimeter-quantized sensor model
    InstanceMask masks;    // visibility-resolved instance labels
    std::vector<Instance> gt;
    CameraIntrinsics camera;
};

// Deterministic in cfg.seed. Boxes rest on the y=0 floor plane, are placed
// without interpenetration, composited by per-pixel minimum depth, then
// noise (clamped at 4.5 sigma), 1% dropout and millimeter quantization are
// applied. Throws PlacementFailure after 1000 rejected samples.
Scene generate_scene(const SceneConfig& cfg);

// Dataset directory format:
//   depth.png   16-bit grayscale, millimeters, 0 = no return
//   mask.png    8-bit grayscale, instance id, 0 = background
//   camera.txt  fx fy cx cy width height, one per line
//   gt.txt      id + 12 floats (row-major R|t) + dx dy dz per line
void write_scene(const Scene& scene, const std::filesystem::path& dir);
Scene read_scene(const std::filesystem::path& dir);

}  // namespace boxfit
