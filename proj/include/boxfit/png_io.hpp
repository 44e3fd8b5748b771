#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace boxfit {

// Minimal grayscale PNG wrappers over libpng. 16-bit samples are exchanged
// host-endian; files follow PNG network byte order.

struct Gray16 {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> data;
};

struct Gray8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;
};

struct Rgb8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // interleaved r,g,b
};

void write_png_gray16(const std::filesystem::path& path, const Gray16& img);
Gray16 read_png_gray16(const std::filesystem::path& path);

void write_png_gray8(const std::filesystem::path& path, const Gray8& img);
Gray8 read_png_gray8(const std::filesystem::path& path);

void write_png_rgb8(const std::filesystem::path& path, const Rgb8& img);

}  // namespace boxfit
