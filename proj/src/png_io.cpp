#include "boxfit/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "boxfit/errors.hpp"

namespace boxfit {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::filesystem::path& path, const char* what) {
    throw ParseError(path.string(), 0, what);
}

void write_gray(const std::filesystem::path& path, int width, int height,
                int bit_depth, const std::vector<png_bytep>& rows,
                int color_type = PNG_COLOR_TYPE_GRAY) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw Error("cannot open for writing: " + path.string());

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng write failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);  // host little-endian samples
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FilePtr fp;

    explicit PngReader(const std::filesystem::path& path) {
        fp.reset(std::fopen(path.string().c_str(), "rb"));
        if (!fp) throw Error("cannot open for reading: " + path.string());
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                     nullptr);
        info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info) {
            png_destroy_read_struct(&png, &info, nullptr);
            throw Error("libpng init failed");
        }
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

}  // namespace

void write_png_gray16(const std::filesystem::path& path, const Gray16& img) {
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y] = reinterpret_cast<png_bytep>(
            const_cast<std::uint16_t*>(img.data.data()) +
            size_t(y) * img.width);
    }
    write_gray(path, img.width, img.height, 16, rows);
}

Gray16 read_png_gray16(const std::filesystem::path& path) {
    PngReader r(path);
    if (setjmp(png_jmpbuf(r.png))) fail(path, "corrupt PNG stream");
    png_init_io(r.png, r.fp.get());
    png_read_info(r.png, r.info);
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(r.png, r.info) != 16) {
        fail(path, "expected 16-bit grayscale PNG");
    }
    png_set_swap(r.png);
    Gray16 img;
    img.width = int(png_get_image_width(r.png, r.info));
    img.height = int(png_get_image_height(r.png, r.info));
    img.data.resize(size_t(img.width) * img.height);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y] =
            reinterpret_cast<png_bytep>(img.data.data() + size_t(y) * img.width);
    }
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

void write_png_gray8(const std::filesystem::path& path, const Gray8& img) {
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y] = const_cast<png_bytep>(img.data.data() + size_t(y) * img.width);
    }
    write_gray(path, img.width, img.height, 8, rows);
}

Gray8 read_png_gray8(const std::filesystem::path& path) {
    PngReader r(path);
    if (setjmp(png_jmpbuf(r.png))) fail(path, "corrupt PNG stream");
    png_init_io(r.png, r.fp.get());
    png_read_info(r.png, r.info);
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(r.png, r.info) != 8) {
        fail(path, "expected 8-bit grayscale PNG");
    }
    Gray8 img;
    img.width = int(png_get_image_width(r.png, r.info));
    img.height = int(png_get_image_height(r.png, r.info));
    img.data.resize(size_t(img.width) * img.height);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y] = img.data.data() + size_t(y) * img.width;
    }
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

void write_png_rgb8(const std::filesystem::path& path, const Rgb8& img) {
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y] =
            const_cast<png_bytep>(img.data.data() + size_t(y) * img.width * 3);
    }
    write_gray(path, img.width, img.height, 8, rows, PNG_COLOR_TYPE_RGB);
}

}  // namespace boxfit
