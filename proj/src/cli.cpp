#include "boxfit/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "boxfit/config.hpp"
#include "boxfit/errors.hpp"
#include "boxfit/png_io.hpp"
#include "boxfit/render.hpp"

namespace boxfit {

namespace {

namespace fs = std::filesystem;

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

struct DatasetEntry {
    fs::path dir;
    int scene_id = 0;
};

// A dataset dir carries manifest.txt; a bare scene dir carries camera.txt.
std::vector<DatasetEntry> list_scenes(const fs::path& input) {
    std::vector<DatasetEntry> entries;
    if (fs::exists(input / "manifest.txt")) {
        std::ifstream f(input / "manifest.txt");
        std::string line;
        int id = 0;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string name;
            ss >> name;
            entries.push_back({input / name, id++});
        }
    } else if (fs::exists(input / "camera.txt")) {
        entries.push_back({input, 0});
    } else {
        throw Error("not a scene or dataset directory: " + input.string());
    }
    return entries;
}

PipelineConfig pipeline_config_from(const EstimateOptions& opt) {
    PipelineConfig cfg;
    if (opt.config_path) cfg = load_app_config(*opt.config_path).pipeline;
    if (opt.no_depth_filter) cfg.depth_filter_enabled = false;
    if (opt.no_early_stop) cfg.search.early_stop_enabled = false;
    if (opt.tau_px) cfg.search.tau_px = *opt.tau_px;
    if (opt.t_max) cfg.search.t_max = *opt.t_max;
    if (opt.bounds) {
        cfg.search.bounds_init.lo = Vec3::Constant(opt.bounds->first);
        cfg.search.bounds_init.hi = Vec3::Constant(opt.bounds->second);
        if (!cfg.search.bounds_init.valid())
            throw ConfigError("bounds", "invalid interval");
    }
    return cfg;
}

void write_overlay(const fs::path& path, const Scene& scene,
                   const std::vector<InstancePrediction>& preds) {
    const int w = scene.depth.width;
    const int h = scene.depth.height;
    Rgb8 img;
    img.width = w;
    img.height = h;
    img.data.assign(size_t(w) * h * 3, 0);

    double dmax = 0.0;
    for (double d : scene.depth.data) dmax = std::max(dmax, d);
    for (size_t i = 0; i < scene.depth.data.size(); ++i) {
        const double d = scene.depth.data[i];
        const std::uint8_t g =
            d > 0.0 ? std::uint8_t(40 + 200 * (1.0 - d / (dmax + 1e-9))) : 0;
        img.data[i * 3 + 0] = g;
        img.data[i * 3 + 1] = g;
        img.data[i * 3 + 2] = g;
    }

    auto draw_boundary = [&](const InstanceMask& mask, int channel) {
        auto on = [&](int x, int y) {
            return x >= 0 && x < w && y >= 0 && y < h && mask.at(x, y) != 0;
        };
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!on(x, y)) continue;
                if (on(x - 1, y) && on(x + 1, y) && on(x, y - 1) && on(x, y + 1))
                    continue;
                const size_t i = (size_t(y) * w + x) * 3;
                img.data[i + 0] = channel == 0 ? 255 : 0;
                img.data[i + 1] = channel == 1 ? 255 : 0;
                img.data[i + 2] = 0;
            }
        }
    };

    for (const Instance& gt : scene.gt) {
        draw_boundary(render_view(gt.dims, gt.pose, scene.camera).mask, 1);
    }
    for (const InstancePrediction& p : preds) {
        draw_boundary(render_view(p.dims, p.pose, scene.camera).mask, 0);
    }
    write_png_rgb8(path, img);
}

struct SceneWork {
    std::vector<InstanceResult> rows;
    std::vector<InstancePrediction> preds;
};

void write_trace_csv(const fs::path& path,
                     const std::vector<DatasetEntry>& entries,
                     const std::vector<SceneWork>& work) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << "scene_id,label,iter,sx,sy,sz,ecad_x,ecad_y,ecad_z,"
         "eobs_x,eobs_y,eobs_z,obs_x,obs_y,obs_z,dec_x,dec_y,dec_z,"
         "rot_change_deg,reason,fallback\n";
    for (size_t i = 0; i < work.size(); ++i) {
        for (const InstancePrediction& p : work[i].preds) {
            for (const SearchIterRecord& r : p.trace.iters) {
                f << entries[i].scene_id << ',' << p.label << ',' << r.iter;
                for (double v : {r.s.sx, r.s.sy, r.s.sz}) f << ',' << fmt("%.9g", v);
                for (int a = 0; a < 3; ++a) f << ',' << fmt("%.3f", r.e_cad[a]);
                for (int a = 0; a < 3; ++a) f << ',' << fmt("%.3f", r.e_obs[a]);
                for (int a = 0; a < 3; ++a) f << ',' << (r.observable[a] ? 1 : 0);
                for (int a = 0; a < 3; ++a) f << ',' << r.decision[a];
                f << ',' << fmt("%.4f", r.rot_change_deg) << ','
                  << to_string(p.trace.reason) << ','
                  << (p.trace.any_fallback ? 1 : 0) << '\n';
            }
        }
    }
}

}  // namespace

void write_results_csv(const fs::path& path,
                       const std::vector<InstanceResult>& rows) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << "scene_id,instance_id,iou3d,rot_err_deg,trans_err_cm,iterations,"
         "wall_time_s,trace_reason\n";
    for (const InstanceResult& r : rows) {
        f << r.scene_id << ',' << r.gt_id << ',' << fmt("%.6f", r.iou) << ','
          << fmt("%.4f", r.rot_err_deg) << ',' << fmt("%.4f", r.trans_err_cm)
          << ',' << r.iterations << ',' << fmt("%.6f", r.wall_time_s) << ','
          << r.trace_reason << '\n';
    }
}

std::vector<InstanceResult> read_results_csv(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open " + path.string());
    std::vector<InstanceResult> rows;
    std::string line;
    long lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) continue;  // header
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 8)
            throw ParseError(path.string(), lineno, "expected 8 fields");
        InstanceResult r;
        r.scene_id = std::stoi(fields[0]);
        r.gt_id = std::stoi(fields[1]);
        r.iou = std::stod(fields[2]);
        r.rot_err_deg = std::stod(fields[3]);
        r.trans_err_cm = std::stod(fields[4]);
        r.iterations = std::stoi(fields[5]);
        r.wall_time_s = std::stod(fields[6]);
        r.trace_reason = fields[7];
        r.matched = r.trace_reason != "unmatched";
        rows.push_back(r);
    }
    return rows;
}

int cmd_generate(const fs::path& config_path, const fs::path& out_dir) {
    AppConfig cfg;
    try {
        cfg = load_app_config(config_path);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        std::fprintf(stderr, "error: cannot create %s\n",
                     out_dir.string().c_str());
        return kExitIo;
    }

    std::ofstream manifest(out_dir / "manifest.txt");
    if (!manifest) {
        std::fprintf(stderr, "error: cannot write manifest\n");
        return kExitIo;
    }

    for (int i = 0; i < cfg.n_scenes; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%04d", i);
        SceneConfig sc = cfg.scene;
        sc.seed = cfg.base_seed + std::uint64_t(i);
        try {
            const Scene scene = generate_scene(sc);
            write_scene(scene, out_dir / name);
            manifest << name << ' ' << sc.seed << '\n';
        } catch (const std::exception& e) {
            std::fprintf(stderr, "scene %s failed: %s\n", name, e.what());
        }
    }
    return kExitOk;
}

int cmd_estimate(const EstimateOptions& opt, EstimateOutput* out) {
    std::vector<DatasetEntry> entries;
    PipelineConfig cfg;
    try {
        entries = list_scenes(opt.input);
        cfg = pipeline_config_from(opt);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }

    std::optional<InstanceMask> external_mask;
    if (opt.mask_in) {
        try {
            const Gray8 m = read_png_gray8(*opt.mask_in);
            InstanceMask mask;
            mask.width = m.width;
            mask.height = m.height;
            mask.data = m.data;
            external_mask = std::move(mask);
        } catch (const Error& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return kExitIo;
        }
    }

    std::vector<SceneWork> work(entries.size());
    std::atomic<size_t> next{0};
    std::atomic<int> io_failures{0};

    const unsigned n_jobs =
        opt.jobs > 0 ? unsigned(opt.jobs)
                     : std::max(1u, std::thread::hardware_concurrency());
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= entries.size()) return;
            try {
                const Scene scene = read_scene(entries[i].dir);
                auto preds =
                    estimate_frame(scene.depth, scene.camera, cfg, external_mask);
                work[i].rows = evaluate_scene(scene, preds, entries[i].scene_id);
                work[i].preds = std::move(preds);
                if (opt.render_overlays) {
                    write_overlay(entries[i].dir / "overlay.png", scene,
                                  work[i].preds);
                }
            } catch (const Error& e) {
                std::fprintf(stderr, "scene %s failed: %s\n",
                             entries[i].dir.string().c_str(), e.what());
                ++io_failures;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<InstanceResult> rows;
    for (const SceneWork& w : work) {
        rows.insert(rows.end(), w.rows.begin(), w.rows.end());
    }

    const fs::path results_path =
        opt.results_path ? *opt.results_path : opt.input / "results.csv";
    const fs::path trace_path =
        opt.trace_path ? *opt.trace_path : opt.input / "trace.csv";
    try {
        write_results_csv(results_path, rows);
        write_trace_csv(trace_path, entries, work);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }

    if (out) {
        out->rows = std::move(rows);
        out->scenes = int(entries.size());
    }
    return io_failures.load() > 0 ? kExitIo : kExitOk;
}

namespace {

void print_eval(const std::vector<InstanceResult>& rows) {
    auto precision_at_iou = [&](double thr) {
        return average_precision(
            rows, [=](const InstanceResult& r) { return r.iou >= thr; });
    };
    std::printf("instances: %zu\n", rows.size());
    for (double thr : {0.25, 0.5, 0.7, 0.8, 0.9}) {
        std::printf("precision@IoU%.2f: %.4f\n", thr, precision_at_iou(thr));
    }
    const double tp = average_precision(rows, [](const InstanceResult& r) {
        return r.rot_err_deg <= 20.0 && r.trans_err_cm <= 5.0;
    });
    std::printf("precision@20deg5cm: %.4f\n", tp);
    double iters = 0.0, wall = 0.0;
    for (const auto& r : rows) {
        iters += r.iterations;
        wall += r.wall_time_s;
    }
    std::printf("mean iterations: %.2f\n", iters / double(rows.size()));
    std::printf("mean wall time: %.3fs\n", wall / double(rows.size()));
}

}  // namespace

int cmd_eval(const fs::path& results_or_dataset) {
    fs::path path = results_or_dataset;
    if (fs::is_directory(path)) path /= "results.csv";
    std::vector<InstanceResult> rows;
    try {
        rows = read_results_csv(path);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    try {
        print_eval(rows);
    } catch (const UndefinedMetric& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitEmptyDataset;
    }
    return kExitOk;
}

int cmd_ablate(const fs::path& dataset, const std::string& which,
               EstimateOptions base) {
    if (which != "depth-filter" && which != "early-stop") {
        std::fprintf(stderr,
                     "error: unknown ablation '%s' (use depth-filter or "
                     "early-stop)\n",
                     which.c_str());
        return kExitConfig;
    }
    base.input = dataset;

    EstimateOptions on = base;
    EstimateOptions off = base;
    if (which == "depth-filter") {
        on.no_depth_filter = false;
        off.no_depth_filter = true;
    } else {
        on.no_early_stop = false;
        off.no_early_stop = true;
    }
    on.results_path = dataset / ("results_" + which + "_on.csv");
    on.trace_path = dataset / ("trace_" + which + "_on.csv");
    off.results_path = dataset / ("results_" + which + "_off.csv");
    off.trace_path = dataset / ("trace_" + which + "_off.csv");

    EstimateOutput out_on, out_off;
    int rc = cmd_estimate(on, &out_on);
    if (rc != kExitOk) return rc;
    rc = cmd_estimate(off, &out_off);
    if (rc != kExitOk) return rc;
    if (out_on.rows.empty()) {
        std::fprintf(stderr, "error: empty dataset\n");
        return kExitEmptyDataset;
    }

    auto precision_at = [](const std::vector<InstanceResult>& rows, double thr) {
        return average_precision(
            rows, [=](const InstanceResult& r) { return r.iou >= thr; });
    };
    auto mean_std_time = [](const std::vector<InstanceResult>& rows) {
        double m = 0.0;
        for (const auto& r : rows) m += r.wall_time_s;
        m /= double(rows.size());
        double v = 0.0;
        for (const auto& r : rows) {
            v += (r.wall_time_s - m) * (r.wall_time_s - m);
        }
        return std::make_pair(m, std::sqrt(v / double(rows.size())));
    };
    auto mean_iters = [](const std::vector<InstanceResult>& rows) {
        double m = 0.0;
        for (const auto& r : rows) m += r.iterations;
        return m / double(rows.size());
    };

    if (which == "depth-filter") {
        const double p_on = precision_at(out_on.rows, 0.8);
        const double p_off = precision_at(out_off.rows, 0.8);
        std::printf("ablation: depth-filter (paired, %d scenes)\n",
                    out_on.scenes);
        std::printf("%-22s %10s\n", "variant", "prec@0.80");
        std::printf("%-22s %10.4f\n", "with filter", p_on);
        std::printf("%-22s %10.4f\n", "without filter", p_off);
        std::printf("delta: %+.4f\n", p_on - p_off);
    } else {
        const double p_on = precision_at(out_on.rows, 0.9);
        const double p_off = precision_at(out_off.rows, 0.9);
        const auto [t_on, s_on] = mean_std_time(out_on.rows);
        const auto [t_off, s_off] = mean_std_time(out_off.rows);
        const double it_on = mean_iters(out_on.rows);
        const double it_off = mean_iters(out_off.rows);
        std::printf("ablation: early-stop (paired, %d runs)\n", out_on.scenes);
        std::printf("%-22s %10s %16s %10s\n", "variant", "prec@0.90",
                    "time mean±std", "iters");
        std::printf("%-22s %10.4f %9.3f±%.3fs %9.2f\n", "binary search",
                    p_off, t_off, s_off, it_off);
        std::printf("%-22s %10.4f %9.3f±%.3fs %9.2f\n", "+ early stopping",
                    p_on, t_on, s_on, it_on);
        std::printf("iteration reduction: %.1f%%\n",
                    100.0 * (1.0 - it_on / it_off));
        std::printf("time reduction: %.1f%%\n", 100.0 * (1.0 - t_on / t_off));
        std::printf("precision delta: %+.4f\n", p_on - p_off);
    }
    return kExitOk;
}

}  // namespace boxfit
