#include <CLI11.hpp>

#include <string>

#include "boxfit/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Category-level box pose and dimension estimation from RGB-D"};
    app.require_subcommand(1);

    // generate
    std::string gen_config, gen_out;
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
    gen->add_option("config", gen_config, "flat key=value config file")
        ->required();
    gen->add_option("out", gen_out, "output dataset directory")->required();

    // estimate
    boxfit::EstimateOptions est;
    std::string est_input, est_config, est_mask, est_results, est_trace;
    std::pair<double, double> est_bounds{0.0, 0.0};
    double est_tau_px = -1.0;
    int est_t_max = -1;
    auto* e = app.add_subcommand("estimate", "run the pipeline on a dataset");
    e->add_option("input", est_input, "scene or dataset directory")->required();
    e->add_option("--config", est_config, "pipeline config file");
    e->add_option("--mask-in", est_mask, "use this mask PNG, skip segmentation");
    e->add_option("--out", est_results, "results CSV path");
    e->add_option("--trace-out", est_trace, "trace CSV path");
    e->add_flag("--no-depth-filter", est.no_depth_filter,
                "disable the depth-consistency filter");
    e->add_flag("--no-early-stop", est.no_early_stop,
                "disable early stopping of the dimension search");
    e->add_option("--tau-px", est_tau_px, "extent convergence tolerance, px");
    e->add_option("--t-max", est_t_max, "max dimension-search iterations");
    auto* bounds_opt = e->add_option("--bounds", est_bounds,
                                     "scale search bounds lo,hi")
                           ->delimiter(',');
    e->add_flag("--render-overlays", est.render_overlays,
                "write per-scene overlay PNGs");
    e->add_option("--jobs", est.jobs, "worker threads (default: logical cpus)");

    // eval
    std::string eval_input;
    auto* ev = app.add_subcommand("eval", "aggregate a results CSV");
    ev->add_option("input", eval_input, "results.csv or dataset directory")
        ->required();

    // ablate
    std::string abl_dataset, abl_which, abl_config;
    int abl_jobs = 0;
    auto* ab = app.add_subcommand("ablate", "paired feature on/off comparison");
    ab->add_option("dataset", abl_dataset, "dataset directory")->required();
    ab->add_option("which", abl_which, "depth-filter | early-stop")->required();
    ab->add_option("--config", abl_config, "pipeline config file");
    ab->add_option("--jobs", abl_jobs, "worker threads");

    CLI11_PARSE(app, argc, argv);

    if (*gen) return boxfit::cmd_generate(gen_config, gen_out);

    if (*e) {
        est.input = est_input;
        if (!est_config.empty()) est.config_path = est_config;
        if (!est_mask.empty()) est.mask_in = est_mask;
        if (!est_results.empty()) est.results_path = est_results;
        if (!est_trace.empty()) est.trace_path = est_trace;
        if (est_tau_px > 0.0) est.tau_px = est_tau_px;
        if (est_t_max > 0) est.t_max = est_t_max;
        if (bounds_opt->count() > 0) est.bounds = est_bounds;
        return boxfit::cmd_estimate(est);
    }

    if (*ev) return boxfit::cmd_eval(eval_input);

    if (*ab) {
        boxfit::EstimateOptions base;
        if (!abl_config.empty()) base.config_path = abl_config;
        base.jobs = abl_jobs;
        return boxfit::cmd_ablate(abl_dataset, abl_which, base);
    }
    return 0;
}
