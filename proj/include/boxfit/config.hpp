#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "boxfit/pipeline.hpp"
#include "boxfit/scenegen.hpp"

namespace boxfit {

// One key=value per line, '#' starts a comment. Every pipeline and scene
// parameter is addressable as module.field.
struct AppConfig {
    SceneConfig scene;
    int n_scenes = 1;
    std::uint64_t base_seed = 0;
    PipelineConfig pipeline;
};

AppConfig parse_app_config(const std::map<std::string, std::string>& kv);
AppConfig load_app_config(const std::filesystem::path& path);

// Raw key=value reader; throws ConfigError on malformed lines.
std::map<std::string, std::string> read_flat_config(
    const std::filesystem::path& path);

}  // namespace boxfit
