#include <png.h>

#include <cstdio>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "dho/image.hpp"

namespace dho {

namespace {

struct FileCloser {
    void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t to_u8(double v) {
    double s = v * 255.0 + 0.5;
    if (s < 0) s = 0;
    if (s > 255) s = 255;
    return uint8_t(s);
}

void write_png(const std::string& path, int w, int h, int color_type, int bit_depth,
               const std::vector<png_bytep>& rows) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("png write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);  // rows are little-endian in memory
    png_write_image(png, const_cast<png_bytep*>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct PngReader {
    FilePtr fp;
    png_structp png = nullptr;
    png_infop info = nullptr;

    explicit PngReader(const std::string& path) : fp(std::fopen(path.c_str(), "rb")) {
        if (!fp) throw DataError("cannot open for reading: " + path);
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        info = png_create_info_struct(png);
        if (setjmp(png_jmpbuf(png))) throw DataError("png read failed: " + path);
        png_init_io(png, fp.get());
        png_read_info(png, info);
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

}  // namespace

void write_png_rgb8(const std::string& path, const ImageD& img) {
    if (img.channels != 3) throw ShapeMismatch("write_png_rgb8 expects 3 channels");
    std::vector<uint8_t> buf(img.pixel_count() * 3);
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = to_u8(img.data[i]);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = buf.data() + size_t(y) * img.width * 3;
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, rows);
}

void write_png_gray8(const std::string& path, const ImageD& img) {
    if (img.channels != 1) throw ShapeMismatch("write_png_gray8 expects 1 channel");
    std::vector<uint8_t> buf(img.pixel_count());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = to_u8(img.data[i]);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = buf.data() + size_t(y) * img.width;
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 8, rows);
}

void write_png_gray16(const std::string& path, const ClassImage& img) {
    if (img.channels != 1) throw ShapeMismatch("write_png_gray16 expects 1 channel");
    std::vector<png_bytep> rows(img.height);
    auto* base = reinterpret_cast<const uint8_t*>(img.data.data());
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(base + size_t(y) * img.width * 2);
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 16, rows);
}

ImageD read_png_rgb8(const std::string& path) {
    PngReader r(path);
    if (setjmp(png_jmpbuf(r.png))) throw DataError("png read failed: " + path);
    png_set_expand(r.png);
    png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);
    const int w = png_get_image_width(r.png, r.info);
    const int h = png_get_image_height(r.png, r.info);
    std::vector<uint8_t> buf(size_t(h) * w * 3);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = buf.data() + size_t(y) * w * 3;
    png_read_image(r.png, rows.data());
    ImageD img(h, w, 3);
    for (size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0;
    return img;
}

ImageD read_png_gray8(const std::string& path) {
    PngReader r(path);
    if (setjmp(png_jmpbuf(r.png))) throw DataError("png read failed: " + path);
    png_set_expand(r.png);
    png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_set_rgb_to_gray(r.png, 1, -1, -1);
    png_read_update_info(r.png, r.info);
    const int w = png_get_image_width(r.png, r.info);
    const int h = png_get_image_height(r.png, r.info);
    std::vector<uint8_t> buf(size_t(h) * w);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = buf.data() + size_t(y) * w;
    png_read_image(r.png, rows.data());
    ImageD img(h, w, 1);
    for (size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0;
    return img;
}

ClassImage read_png_gray16(const std::string& path) {
    PngReader r(path);
    if (setjmp(png_jmpbuf(r.png))) throw DataError("png read failed: " + path);
    if (png_get_bit_depth(r.png, r.info) != 16 ||
        png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY)
        throw DataError("expected 16-bit grayscale png: " + path);
    png_set_swap(r.png);
    png_read_update_info(r.png, r.info);
    const int w = png_get_image_width(r.png, r.info);
    const int h = png_get_image_height(r.png, r.info);
    ClassImage img(h, w, 1);
    std::vector<png_bytep> rows(h);
    auto* base = reinterpret_cast<uint8_t*>(img.data.data());
    for (int y = 0; y < h; ++y) rows[y] = base + size_t(y) * w * 2;
    png_read_image(r.png, rows.data());
    return img;
}

void write_float_image(const std::string& path, const std::string& sidecar_path, const ImageD& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    std::vector<float> buf(img.data.begin(), img.data.end());
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
    nlohmann::json meta{{"height", img.height}, {"width", img.width}, {"channels", img.channels}};
    std::ofstream side(sidecar_path);
    if (!side) throw DataError("cannot open for writing: " + sidecar_path);
    side << meta.dump(2) << "\n";
}

ImageD read_float_image(const std::string& path, const std::string& sidecar_path) {
    std::ifstream side(sidecar_path);
    if (!side) throw DataError("cannot open for reading: " + sidecar_path);
    nlohmann::json meta = nlohmann::json::parse(side);
    ImageD img(meta.at("height").get<int>(), meta.at("width").get<int>(),
               meta.at("channels").get<int>());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path);
    std::vector<float> buf(img.data.size());
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
    if (size_t(in.gcount()) != buf.size() * sizeof(float))
        throw DataError("truncated float image: " + path);
    for (size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i];
    return img;
}

}  // namespace dho
