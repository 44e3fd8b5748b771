#include "boxfit/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "boxfit/errors.hpp"

namespace boxfit {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + v + "'");
    }
}

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return int(d);
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const unsigned long long d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key, "expected true/false, got '" + v + "'");
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
    std::istringstream ss(v);
    std::string part;
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, part, ','))
            throw ConfigError(key, "expected three comma-separated numbers");
        out[i] = to_double(key, trim(part));
    }
    if (std::getline(ss, part, ','))
        throw ConfigError(key, "expected exactly three numbers");
    return out;
}

StackLayout to_layout(const std::string& key, const std::string& v) {
    if (v == "single") return StackLayout::Single;
    if (v == "stack") return StackLayout::Stack;
    if (v == "pile") return StackLayout::Pile;
    throw ConfigError(key, "expected single|stack|pile, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> read_flat_config(
    const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    long lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno),
                              "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path.string() + ":" + std::to_string(lineno),
                              "empty key");
        kv[key] = val;
    }
    return kv;
}

AppConfig parse_app_config(const std::map<std::string, std::string>& kv) {
    AppConfig cfg;
    for (const auto& [key, v] : kv) {
        if (key == "dataset.n_scenes") cfg.n_scenes = to_int(key, v);
        else if (key == "dataset.base_seed") cfg.base_seed = to_u64(key, v);
        else if (key == "scene.n_boxes") cfg.scene.n_boxes = to_int(key, v);
        else if (key == "scene.layout") cfg.scene.layout = to_layout(key, v);
        else if (key == "scene.dims_min") cfg.scene.dims_min = to_vec3(key, v);
        else if (key == "scene.dims_max") cfg.scene.dims_max = to_vec3(key, v);
        else if (key == "scene.occlusion_level") cfg.scene.occlusion_level = to_double(key, v);
        else if (key == "scene.depth_noise_sigma") cfg.scene.depth_noise_sigma = to_double(key, v);
        else if (key == "scene.seed") cfg.scene.seed = to_u64(key, v);
        else if (key == "scene.tilt_deg_max") cfg.scene.tilt_deg_max = to_double(key, v);
        else if (key == "scene.far_clip") cfg.scene.far_clip = to_double(key, v);
        else if (key == "scene.min_stack_setback") cfg.scene.min_stack_setback = to_double(key, v);
        else if (key == "view.pitch_deg_min") cfg.scene.view.pitch_deg_min = to_double(key, v);
        else if (key == "view.pitch_deg_max") cfg.scene.view.pitch_deg_max = to_double(key, v);
        else if (key == "view.dist_min") cfg.scene.view.dist_min = to_double(key, v);
        else if (key == "view.dist_max") cfg.scene.view.dist_max = to_double(key, v);
        else if (key == "view.cam_yaw_deg_min") cfg.scene.view.cam_yaw_deg_min = to_double(key, v);
        else if (key == "view.cam_yaw_deg_max") cfg.scene.view.cam_yaw_deg_max = to_double(key, v);
        else if (key == "view.box_yaw_deg_min") cfg.scene.view.box_yaw_deg_min = to_double(key, v);
        else if (key == "view.box_yaw_deg_max") cfg.scene.view.box_yaw_deg_max = to_double(key, v);
        else if (key == "camera.fx") cfg.scene.camera.fx = to_double(key, v);
        else if (key == "camera.fy") cfg.scene.camera.fy = to_double(key, v);
        else if (key == "camera.cx") cfg.scene.camera.cx = to_double(key, v);
        else if (key == "camera.cy") cfg.scene.camera.cy = to_double(key, v);
        else if (key == "camera.width") cfg.scene.camera.width = to_int(key, v);
        else if (key == "camera.height") cfg.scene.camera.height = to_int(key, v);
        else if (key == "segment.plane_inlier_threshold") cfg.pipeline.segment.plane_inlier_threshold = to_double(key, v);
        else if (key == "segment.cluster_distance") cfg.pipeline.segment.cluster_distance = to_double(key, v);
        else if (key == "segment.min_component_px") cfg.pipeline.segment.min_component_px = to_int(key, v);
        else if (key == "segment.ransac_iters") cfg.pipeline.segment.ransac_iters = to_int(key, v);
        else if (key == "segment.min_plane_fraction") cfg.pipeline.segment.min_plane_fraction = to_double(key, v);
        else if (key == "segment.seed") cfg.pipeline.segment.seed = to_u64(key, v);
        else if (key == "filter.tau_d") cfg.pipeline.filter.tau_d = to_double(key, v);
        else if (key == "filter.max_median_residual") cfg.pipeline.filter.max_median_residual = to_double(key, v);
        else if (key == "filter.max_protrusion") cfg.pipeline.filter.max_protrusion = to_double(key, v);
        else if (key == "filter.min_coverage") cfg.pipeline.filter.min_coverage = to_double(key, v);
        else if (key == "filter.enabled") cfg.pipeline.depth_filter_enabled = to_bool(key, v);
        else if (key == "search.tau_px") cfg.pipeline.search.tau_px = to_double(key, v);
        else if (key == "search.tau_scale") cfg.pipeline.search.tau_scale = to_double(key, v);
        else if (key == "search.t_max") cfg.pipeline.search.t_max = to_int(key, v);
        else if (key == "search.bounds_lo") cfg.pipeline.search.bounds_init.lo = Vec3::Constant(to_double(key, v));
        else if (key == "search.bounds_hi") cfg.pipeline.search.bounds_init.hi = Vec3::Constant(to_double(key, v));
        else if (key == "search.early_stop_enabled") cfg.pipeline.search.early_stop_enabled = to_bool(key, v);
        else if (key == "search.vertex_align_tol_deg") cfg.pipeline.search.vertex_align_tol_deg = to_double(key, v);
        else if (key == "icp.max_iters") cfg.pipeline.icp.max_iters = to_int(key, v);
        else if (key == "icp.rot_tol_deg") cfg.pipeline.icp.rot_tol_deg = to_double(key, v);
        else if (key == "icp.trans_tol") cfg.pipeline.icp.trans_tol = to_double(key, v);
        else if (key == "pipeline.hyp_icp_iters") cfg.pipeline.hyp_icp_iters = to_int(key, v);
        else if (key == "pipeline.score_delta") cfg.pipeline.score_delta = to_double(key, v);
        else if (key == "pipeline.max_cloud_points") cfg.pipeline.max_cloud_points = to_int(key, v);
        else if (key == "pipeline.warm_start") cfg.pipeline.warm_start = to_bool(key, v);
        else throw ConfigError(key, "unknown key");
    }

    if (cfg.n_scenes < 1)
        throw ConfigError("dataset.n_scenes", "must be >= 1");
    if (!((cfg.scene.dims_min.array() > 0.0).all()))
        throw ConfigError("scene.dims_min", "must be positive");
    if (!((cfg.scene.dims_min.array() < cfg.scene.dims_max.array()).all()))
        throw ConfigError("scene.dims_max", "min must be < max per axis");
    if (cfg.scene.occlusion_level < 0.0 || cfg.scene.occlusion_level > 1.0)
        throw ConfigError("scene.occlusion_level", "must be in [0,1]");
    if (cfg.scene.depth_noise_sigma < 0.0)
        throw ConfigError("scene.depth_noise_sigma", "must be >= 0");
    if (!cfg.scene.camera.valid())
        throw ConfigError("camera", "invalid intrinsics");
    if (!cfg.pipeline.search.bounds_init.valid())
        throw ConfigError("search.bounds_lo", "invalid scale interval");
    if (cfg.pipeline.search.t_max < 1)
        throw ConfigError("search.t_max", "must be >= 1");
    return cfg;
}

AppConfig load_app_config(const std::filesystem::path& path) {
    return parse_app_config(read_flat_config(path));
}

}  // namespace boxfit
