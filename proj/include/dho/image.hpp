#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dho/error.hpp"

namespace dho {

// Dense H x W x C image, row-major, channel-interleaved.
template <typename T>
struct Img {
    int height = 0, width = 0, channels = 0;
    std::vector<T> data;

    Img() = default;
    Img(int h, int w, int c, T fill = T{})
        : height(h), width(w), channels(c), data(size_t(h) * w * c, fill) {}

    T& at(int y, int x, int c = 0) { return data[(size_t(y) * width + x) * channels + c]; }
    T at(int y, int x, int c = 0) const { return data[(size_t(y) * width + x) * channels + c]; }

    size_t pixel_count() const { return size_t(height) * width; }
    bool same_shape(const Img& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    bool empty() const { return data.empty(); }
};

using ImageD = Img<double>;
using ImageF = Img<float>;
using MaskImage = Img<uint8_t>;   // binary {0,1}
using ClassImage = Img<uint16_t>; // per-pixel class row ids

inline void require_same_shape(const ImageD& a, const ImageD& b, const char* what) {
    if (!a.same_shape(b)) throw ShapeMismatch(std::string(what) + ": image shapes differ");
}

// PNG I/O (8-bit gray/RGB and 16-bit gray). Values for float images are in [0,1].
void write_png_rgb8(const std::string& path, const ImageD& img);
void write_png_gray8(const std::string& path, const ImageD& img);
void write_png_gray16(const std::string& path, const ClassImage& img);
ImageD read_png_rgb8(const std::string& path);
ImageD read_png_gray8(const std::string& path);
ClassImage read_png_gray16(const std::string& path);

// Flat little-endian float32 dump with a JSON sidecar describing the shape.
void write_float_image(const std::string& path, const std::string& sidecar_path, const ImageD& img);
ImageD read_float_image(const std::string& path, const std::string& sidecar_path);

}  // namespace dho
