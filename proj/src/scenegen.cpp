#include "boxfit/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "boxfit/errors.hpp"
#include "boxfit/png_io.hpp"
#include "boxfit/render.hpp"
#include "boxfit/rng.hpp"

namespace boxfit {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

Mat3 rot_y(double rad) {
    Mat3 m;
    m << std::cos(rad), 0.0, std::sin(rad),  //
        0.0, 1.0, 0.0,                        //
        -std::sin(rad), 0.0, std::cos(rad);
    return m;
}

Mat3 axis_angle(const Vec3& axis, double rad) {
    return Eigen::AngleAxisd(rad, axis.normalized()).toRotationMatrix();
}

struct WorldBox {
    Mat3 rot;     // box -> world
    Vec3 center;  // world
    BoxDims dims;
};

// Separating-axis overlap test for two oriented boxes, each inflated by
// margin. With margin 0, touching contact counts as separated.
bool boxes_overlap(const WorldBox& a, const WorldBox& b, double margin = 0.0) {
    constexpr double kTol = 1e-9;
    const Vec3 d = b.center - a.center;
    std::vector<Vec3> axes;
    for (int i = 0; i < 3; ++i) axes.push_back(a.rot.col(i));
    for (int i = 0; i < 3; ++i) axes.push_back(b.rot.col(i));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const Vec3 c = a.rot.col(i).cross(b.rot.col(j));
            if (c.squaredNorm() > 1e-12) axes.push_back(c.normalized());
        }
    }
    const Vec3 ha = a.dims.half() + Vec3::Constant(margin);
    const Vec3 hb = b.dims.half() + Vec3::Constant(margin);
    for (const Vec3& axis : axes) {
        double ra = 0.0, rb = 0.0;
        for (int i = 0; i < 3; ++i) {
            ra += ha[i] * std::abs(axis.dot(a.rot.col(i)));
            rb += hb[i] * std::abs(axis.dot(b.rot.col(i)));
        }
        if (std::abs(axis.dot(d)) >= ra + rb - kTol) return false;
    }
    return true;
}

BoxDims sample_dims(Rng& rng, const SceneConfig& cfg) {
    BoxDims d;
    d.dx = rng.uniform(cfg.dims_min.x(), cfg.dims_max.x());
    d.dy = rng.uniform(cfg.dims_min.y(), cfg.dims_max.y());
    d.dz = rng.uniform(cfg.dims_min.z(), cfg.dims_max.z());
    return d;
}

// Raise the box so its lowest corner rests on the floor.
double rest_height(const Mat3& rot, const BoxDims& dims) {
    const Vec3 h = dims.half();
    double lowest = 0.0;
    for (int i = 0; i < 8; ++i) {
        const Vec3 c((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                     (i & 4) ? h.z() : -h.z());
        lowest = std::min(lowest, (rot * c).y());
    }
    return -lowest;
}

std::vector<WorldBox> place_boxes(const SceneConfig& cfg, Rng& rng) {
    std::vector<WorldBox> boxes;
    int attempts = 0;
    auto bump = [&]() {
        if (++attempts > 1000)
            throw PlacementFailure(
                "generate_scene: could not place boxes without overlap");
    };

    const double yaw_lo = cfg.view.box_yaw_deg_min * kDegToRad;
    const double yaw_hi = cfg.view.box_yaw_deg_max * kDegToRad;

    switch (cfg.layout) {
        case StackLayout::Single: {
            Rng bs = rng.substream(100);
            WorldBox b;
            b.dims = sample_dims(bs, cfg);
            b.rot = rot_y(bs.uniform(yaw_lo, yaw_hi));
            b.center = Vec3(bs.uniform(-0.15, 0.15), b.dims.dy / 2.0,
                            bs.uniform(-0.15, 0.15));
            boxes.push_back(b);
            break;
        }
        case StackLayout::Stack: {
            // Largest footprint at the bottom; neighbours staggered in depth
            // so front faces stay separable.
            std::vector<BoxDims> dims(cfg.n_boxes);
            Rng bs = rng.substream(100);
            for (auto& d : dims) d = sample_dims(bs, cfg);
            // Widest first: the lateral support check below must be able to
            // succeed for every box above.
            std::sort(dims.begin(), dims.end(),
                      [](const BoxDims& a, const BoxDims& b) {
                          return a.dx > b.dx;
                      });
            const double base_yaw = bs.uniform(yaw_lo, yaw_hi);
            double top = 0.0;
            for (int i = 0; i < cfg.n_boxes; ++i) {
                WorldBox b;
                b.dims = dims[i];
                for (;;) {
                    bump();
                    b.rot = rot_y(base_yaw + bs.uniform(-0.05, 0.05));
                    b.center = Vec3(bs.uniform(-0.02, 0.02),
                                    top + b.dims.dy / 2.0,
                                    bs.uniform(-0.03, 0.03));
                    if (i == 0) break;
                    const WorldBox& below = boxes.back();
                    const double front = b.center.z() + b.dims.dz / 2.0;
                    const double front_below =
                        below.center.z() + below.dims.dz / 2.0;
                    if (std::abs(front - front_below) < cfg.min_stack_setback)
                        continue;
                    if (b.dims.dx / 2.0 + std::abs(b.center.x()) >
                        below.dims.dx / 2.0 + 0.05)
                        continue;  // keep it supported
                    break;
                }
                top += b.dims.dy;
                boxes.push_back(b);
            }
            break;
        }
        case StackLayout::Pile: {
            // Place at an occlusion-independent spread first, then contract
            // toward the centroid and push residual overlaps apart. Keeping
            // the sampling identical across occlusion levels makes visible
            // pixel counts comparable on matched seeds.
            double mean_r = 0.0;
            std::vector<BoxDims> dims(cfg.n_boxes);
            {
                for (int i = 0; i < cfg.n_boxes; ++i) {
                    Rng bs = rng.substream(100 + i);
                    dims[i] = sample_dims(bs, cfg);
                    mean_r += 0.5 * std::hypot(dims[i].dx, dims[i].dz);
                }
                mean_r /= double(cfg.n_boxes);
            }
            const double spread =
                std::min(1.3, std::max(0.35, 1.15 * mean_r *
                                                  std::sqrt(double(cfg.n_boxes))));
            for (int i = 0; i < cfg.n_boxes; ++i) {
                Rng bs = rng.substream(100 + i);
                WorldBox b;
                b.dims = sample_dims(bs, cfg);  // same draws as above
                for (;;) {
                    bump();
                    Mat3 rot = rot_y(bs.uniform(yaw_lo, yaw_hi));
                    if (cfg.tilt_deg_max > 0.0) {
                        const double ang =
                            bs.uniform(0.0, cfg.tilt_deg_max) * kDegToRad;
                        const double dir =
                            bs.uniform(0.0, 2.0 * 3.14159265358979323846);
                        rot = axis_angle(
                                  Vec3(std::cos(dir), 0.0, std::sin(dir)), ang) *
                              rot;
                    }
                    b.rot = rot;
                    b.center = Vec3(bs.uniform(-spread, spread), 0.0,
                                    bs.uniform(-spread, spread));
                    b.center.y() = rest_height(b.rot, b.dims);
                    bool clash = false;
                    for (const WorldBox& other : boxes) {
                        if (boxes_overlap(b, other, 0.004)) {
                            clash = true;
                            break;
                        }
                    }
                    if (!clash) break;
                }
                boxes.push_back(b);
            }

            if (cfg.occlusion_level > 0.0 && cfg.n_boxes > 1) {
                Vec3 centroid = Vec3::Zero();
                for (const WorldBox& b : boxes) centroid += b.center;
                centroid /= double(boxes.size());
                const double f = 1.0 - 0.62 * cfg.occlusion_level;
                for (WorldBox& b : boxes) {
                    b.center.x() = centroid.x() + f * (b.center.x() - centroid.x());
                    b.center.z() = centroid.z() + f * (b.center.z() - centroid.z());
                }
                // Deterministic push-apart of contraction overlaps.
                bool clean = false;
                for (int pass = 0; pass < 80 && !clean; ++pass) {
                    clean = true;
                    for (size_t i = 0; i < boxes.size(); ++i) {
                        for (size_t j = i + 1; j < boxes.size(); ++j) {
                            if (!boxes_overlap(boxes[i], boxes[j], 0.002))
                                continue;
                            clean = false;
                            Vec3 dir = boxes[j].center - boxes[i].center;
                            dir.y() = 0.0;
                            if (dir.squaredNorm() < 1e-12) dir = Vec3(1, 0, 0);
                            dir.normalize();
                            boxes[i].center -= 0.004 * dir;
                            boxes[j].center += 0.004 * dir;
                        }
                    }
                }
                if (!clean)
                    throw PlacementFailure(
                        "generate_scene: could not resolve overlaps after "
                        "contraction");
            }
            break;
        }
    }
    return boxes;
}

}  // namespace

bool SceneConfig::valid() const {
    return n_boxes >= 1 && (dims_min.array() > 0.0).all() &&
           (dims_min.array() < dims_max.array()).all() &&
           occlusion_level >= 0.0 && occlusion_level <= 1.0 &&
           depth_noise_sigma >= 0.0 && camera.valid();
}

Scene generate_scene(const SceneConfig& cfg) {
    if (!cfg.valid()) throw InvalidArgument("generate_scene: invalid config");

    Rng rng(cfg.seed);
    std::vector<WorldBox> boxes = place_boxes(cfg, rng);

    // Aim the camera at the box centroid.
    Vec3 target = Vec3::Zero();
    for (const WorldBox& b : boxes) target += b.center;
    target /= double(boxes.size());

    Rng vs = rng.substream(1);
    const double pitch =
        vs.uniform(cfg.view.pitch_deg_min, cfg.view.pitch_deg_max) * kDegToRad;
    const double dist = vs.uniform(cfg.view.dist_min, cfg.view.dist_max);
    const double cam_yaw =
        vs.uniform(cfg.view.cam_yaw_deg_min, cfg.view.cam_yaw_deg_max) *
        kDegToRad;

    const Vec3 offset(std::sin(cam_yaw) * std::cos(pitch), std::sin(pitch),
                      std::cos(cam_yaw) * std::cos(pitch));
    const Vec3 cam_pos = target + dist * offset;
    const Vec3 fwd = (target - cam_pos).normalized();
    const Vec3 up(0.0, 1.0, 0.0);
    const Vec3 right = fwd.cross(up).normalized();
    const Vec3 img_down = fwd.cross(right).normalized();

    Mat3 w2c;  // world -> camera, rows = camera axes
    w2c.row(0) = right;
    w2c.row(1) = img_down;
    w2c.row(2) = fwd;

    Scene scene;
    scene.camera = cfg.camera;
    scene.depth = DepthImage(cfg.camera.width, cfg.camera.height);
    scene.masks = InstanceMask(cfg.camera.width, cfg.camera.height);

    // Floor plane y = 0 rendered analytically.
    const Vec3 n_cam = w2c * up;
    const Vec3 p0_cam = w2c * (Vec3::Zero() - cam_pos);
    const double plane_off = n_cam.dot(p0_cam);
    for (int y = 0; y < cfg.camera.height; ++y) {
        for (int x = 0; x < cfg.camera.width; ++x) {
            const Vec3 ray((x + 0.5 - cfg.camera.cx) / cfg.camera.fx,
                           (y + 0.5 - cfg.camera.cy) / cfg.camera.fy, 1.0);
            const double denom = n_cam.dot(ray);
            if (std::abs(denom) < 1e-12) continue;
            const double t = plane_off / denom;
            if (t <= 0.0 || t > cfg.far_clip) continue;
            scene.depth.at(x, y) = t;
        }
    }

    // Composite the boxes by minimum depth.
    for (size_t i = 0; i < boxes.size(); ++i) {
        Instance inst;
        inst.dims = boxes[i].dims;
        inst.pose.rotation = w2c * boxes[i].rot;
        inst.pose.translation = w2c * (boxes[i].center - cam_pos);
        scene.gt.push_back(inst);

        const RenderedView rv = render_view(inst.dims, inst.pose, scene.camera);
        for (size_t p = 0; p < rv.depth.data.size(); ++p) {
            if (rv.mask.data[p] == 0) continue;
            double& d = scene.depth.data[p];
            if (d == 0.0 || rv.depth.data[p] < d) {
                d = rv.depth.data[p];
                scene.masks.data[p] = std::uint8_t(i + 1);
            }
        }
    }

    // Sensor model: clamped Gaussian noise, sparse dropout, then millimeter
    // quantization (matching the 16-bit storage format).
    if (cfg.depth_noise_sigma > 0.0) {
        Rng ns = rng.substream(2);
        for (double& d : scene.depth.data) {
            if (d <= 0.0) continue;
            const double g = std::clamp(ns.normal(), -4.5, 4.5);
            d = std::max(0.0, d + cfg.depth_noise_sigma * g);
        }
        Rng ds = rng.substream(3);
        for (double& d : scene.depth.data) {
            if (d <= 0.0) continue;
            if (ds.uniform01() < 0.01) d = 0.0;
        }
    }
    for (double& d : scene.depth.data) {
        d = std::round(d * 1000.0) / 1000.0;
        d = std::min(d, 65.535);
    }

    return scene;
}

void write_scene(const Scene& scene, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    Gray16 depth;
    depth.width = scene.depth.width;
    depth.height = scene.depth.height;
    depth.data.resize(scene.depth.data.size());
    for (size_t i = 0; i < depth.data.size(); ++i) {
        depth.data[i] =
            std::uint16_t(std::lround(scene.depth.data[i] * 1000.0));
    }
    write_png_gray16(dir / "depth.png", depth);

    Gray8 mask;
    mask.width = scene.masks.width;
    mask.height = scene.masks.height;
    mask.data = scene.masks.data;
    write_png_gray8(dir / "mask.png", mask);

    {
        std::ofstream f(dir / "camera.txt");
        if (!f) throw Error("cannot write " + (dir / "camera.txt").string());
        char buf[64];
        for (double v : {scene.camera.fx, scene.camera.fy, scene.camera.cx,
                         scene.camera.cy}) {
            std::snprintf(buf, sizeof(buf), "%.17g\n", v);
            f << buf;
        }
        f << scene.camera.width << "\n" << scene.camera.height << "\n";
    }

    {
        std::ofstream f(dir / "gt.txt");
        if (!f) throw Error("cannot write " + (dir / "gt.txt").string());
        char buf[64];
        for (size_t i = 0; i < scene.gt.size(); ++i) {
            const Instance& inst = scene.gt[i];
            f << (i + 1);
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    std::snprintf(buf, sizeof(buf), " %.17g",
                                  inst.pose.rotation(r, c));
                    f << buf;
                }
                std::snprintf(buf, sizeof(buf), " %.17g",
                              inst.pose.translation(r));
                f << buf;
            }
            for (double v : {inst.dims.dx, inst.dims.dy, inst.dims.dz}) {
                std::snprintf(buf, sizeof(buf), " %.17g", v);
                f << buf;
            }
            f << "\n";
        }
    }
}

Scene read_scene(const std::filesystem::path& dir) {
    Scene scene;

    const auto cam_path = dir / "camera.txt";
    {
        std::ifstream f(cam_path);
        if (!f) throw Error("cannot open " + cam_path.string());
        std::string line;
        double vals[6];
        for (int i = 0; i < 6; ++i) {
            if (!std::getline(f, line))
                throw ParseError(cam_path.string(), i + 1,
                                 "expected 6 lines: fx fy cx cy width height");
            try {
                vals[i] = std::stod(line);
            } catch (const std::exception&) {
                throw ParseError(cam_path.string(), i + 1,
                                 "not a number: '" + line + "'");
            }
        }
        scene.camera = CameraIntrinsics{vals[0], vals[1], vals[2],
                                        vals[3], int(vals[4]), int(vals[5])};
        if (!scene.camera.valid())
            throw ParseError(cam_path.string(), 1, "invalid intrinsics");
    }

    const auto depth_path = dir / "depth.png";
    const Gray16 depth = read_png_gray16(depth_path);
    if (depth.width != scene.camera.width ||
        depth.height != scene.camera.height) {
        throw ParseError(depth_path.string(), 0,
                         "depth size does not match camera.txt");
    }
    scene.depth = DepthImage(depth.width, depth.height);
    for (size_t i = 0; i < depth.data.size(); ++i) {
        scene.depth.data[i] = depth.data[i] / 1000.0;
    }

    const auto mask_path = dir / "mask.png";
    const Gray8 mask = read_png_gray8(mask_path);
    if (mask.width != scene.camera.width || mask.height != scene.camera.height) {
        throw ParseError(mask_path.string(), 0,
                         "mask size does not match camera.txt");
    }
    scene.masks.width = mask.width;
    scene.masks.height = mask.height;
    scene.masks.data = mask.data;

    const auto gt_path = dir / "gt.txt";
    {
        std::ifstream f(gt_path);
        if (!f) throw Error("cannot open " + gt_path.string());
        std::string line;
        long lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::istringstream ss(line);
            long id = 0;
            double v[15];
            ss >> id;
            for (int i = 0; i < 15; ++i) ss >> v[i];
            if (!ss)
                throw ParseError(gt_path.string(), lineno,
                                 "expected id + 15 floats");
            if (id != long(scene.gt.size()) + 1)
                throw ParseError(gt_path.string(), lineno,
                                 "instance ids must be 1..n contiguous");
            Instance inst;
            inst.pose.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8],
                v[9], v[10];
            inst.pose.translation = Vec3(v[3], v[7], v[11]);
            inst.dims = BoxDims{v[12], v[13], v[14]};
            if (!inst.dims.valid())
                throw ParseError(gt_path.string(), lineno,
                                 "non-positive dimensions");
            scene.gt.push_back(inst);
        }
    }

    for (std::uint8_t v : scene.masks.data) {
        if (v > scene.gt.size())
            throw ParseError(mask_path.string(), 0,
                             "mask label exceeds gt instance count");
    }
    return scene;
}

}  // namespace boxfit
