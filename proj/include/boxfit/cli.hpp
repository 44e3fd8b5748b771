#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "boxfit/metrics.hpp"
#include "boxfit/pipeline.hpp"

namespace boxfit {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitEmptyDataset = 4;

struct EstimateOptions {
    std::filesystem::path input;  // scene dir or dataset dir (manifest.txt)
    std::optional<std::filesystem::path> config_path;
    std::optional<std::filesystem::path> results_path;  // default input/results.csv
    std::optional<std::filesystem::path> trace_path;    // default input/trace.csv
    std::optional<std::filesystem::path> mask_in;       // skip the segmenter
    bool no_depth_filter = false;
    bool no_early_stop = false;
    std::optional<double> tau_px;
    std::optional<int> t_max;
    std::optional<std::pair<double, double>> bounds;  // lo,hi for all axes
    bool render_overlays = false;
    int jobs = 0;  // 0 = logical CPUs
};

struct EstimateOutput {
    std::vector<InstanceResult> rows;
    int scenes = 0;
};

// Write N scenes plus manifest.txt (one "<dir> <seed>" line per scene).
int cmd_generate(const std::filesystem::path& config_path,
                 const std::filesystem::path& out_dir);

// Full pipeline over a scene or dataset; writes results/trace CSVs and
// optional per-scene overlay renders.
int cmd_estimate(const EstimateOptions& opt, EstimateOutput* out = nullptr);

// Aggregate a results CSV into precision numbers at standard thresholds.
int cmd_eval(const std::filesystem::path& results_or_dataset);

// Paired feature on/off comparison over one dataset:
// which = "depth-filter" or "early-stop".
int cmd_ablate(const std::filesystem::path& dataset, const std::string& which,
               EstimateOptions base);

// Shared helpers (also used by the acceptance harness).
std::vector<InstanceResult> read_results_csv(const std::filesystem::path& path);
void write_results_csv(const std::filesystem::path& path,
                       const std::vector<InstanceResult>& rows);

}  // namespace boxfit
