#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "boxfit/cli.hpp"
#include "boxfit/config.hpp"
#include "boxfit/errors.hpp"

using namespace boxfit;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const char* name, const std::string& text) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream f(p);
    f << text;
    return p;
}

}  // namespace

TEST_CASE("flat config parses keys, comments and triples") {
    const fs::path p = write_config("boxfit_cfg_ok.cfg",
                                    "# suite configuration\n"
                                    "dataset.n_scenes = 4\n"
                                    "dataset.base_seed = 1000\n"
                                    "scene.layout = stack   # stacked boxes\n"
                                    "scene.n_boxes = 3\n"
                                    "scene.dims_min = 0.2, 0.15, 0.2\n"
                                    "scene.dims_max = 0.5,0.4,0.5\n"
                                    "search.tau_px = 2.5\n"
                                    "filter.enabled = false\n"
                                    "view.pitch_deg_min = 15\n");
    const AppConfig cfg = load_app_config(p);
    CHECK(cfg.n_scenes == 4);
    CHECK(cfg.base_seed == 1000);
    CHECK(cfg.scene.layout == StackLayout::Stack);
    CHECK(cfg.scene.n_boxes == 3);
    CHECK(cfg.scene.dims_min.y() == doctest::Approx(0.15));
    CHECK(cfg.scene.dims_max.z() == doctest::Approx(0.5));
    CHECK(cfg.pipeline.search.tau_px == doctest::Approx(2.5));
    CHECK_FALSE(cfg.pipeline.depth_filter_enabled);
    CHECK(cfg.scene.view.pitch_deg_min == doctest::Approx(15.0));
    fs::remove(p);
}

TEST_CASE("unknown key is rejected by name") {
    const fs::path p =
        write_config("boxfit_cfg_unknown.cfg", "scene.n_box = 3\n");
    try {
        (void)load_app_config(p);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field == "scene.n_box");
    }
    fs::remove(p);
}

TEST_CASE("invalid dims_range names the field") {
    const fs::path p = write_config("boxfit_cfg_range.cfg",
                                    "scene.dims_min = 0.5,0.5,0.5\n"
                                    "scene.dims_max = 0.3,0.6,0.6\n");
    try {
        (void)load_app_config(p);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field == "scene.dims_max");
    }
    fs::remove(p);
}

TEST_CASE("malformed values are rejected") {
    const fs::path p =
        write_config("boxfit_cfg_badnum.cfg", "search.tau_px = fast\n");
    CHECK_THROWS_AS((void)load_app_config(p), ConfigError);
    fs::remove(p);

    const fs::path q =
        write_config("boxfit_cfg_layout.cfg", "scene.layout = heap\n");
    CHECK_THROWS_AS((void)load_app_config(q), ConfigError);
    fs::remove(q);

    const fs::path r =
        write_config("boxfit_cfg_noval.cfg", "just a line without equals\n");
    CHECK_THROWS_AS((void)load_app_config(r), ConfigError);
    fs::remove(r);
}

TEST_CASE("results CSV round-trips through read") {
    std::vector<InstanceResult> rows(3);
    rows[0] = {0, 1, true, 0.912345, 1.25, 0.75, 0.9, 7, 0.125, "early-stopped"};
    rows[1] = {0, 2, true, 0.45, 12.0, 3.5, 0.8, 9, 0.25, "extent-converged"};
    rows[2].scene_id = 1;
    rows[2].gt_id = 1;  // unmatched defaults

    const fs::path p = fs::temp_directory_path() / "boxfit_results.csv";
    write_results_csv(p, rows);
    const auto back = read_results_csv(p);
    REQUIRE(back.size() == 3);
    CHECK(back[0].scene_id == 0);
    CHECK(back[0].gt_id == 1);
    CHECK(back[0].iou == doctest::Approx(0.912345).epsilon(1e-6));
    CHECK(back[0].trace_reason == "early-stopped");
    CHECK(back[0].matched);
    CHECK_FALSE(back[2].matched);
    fs::remove(p);
}
