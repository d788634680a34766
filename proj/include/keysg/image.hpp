#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace keysg {

// 8-bit RGB image, row-major, 3 bytes per pixel.
struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;  // width*height*3

    ImageU8() = default;
    ImageU8(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0) {}

    uint8_t* pixel(int u, int v) { return data.data() + (static_cast<size_t>(v) * width + u) * 3; }
    const uint8_t* pixel(int u, int v) const {
        return data.data() + (static_cast<size_t>(v) * width + u) * 3;
    }
    void set_pixel(int u, int v, uint8_t r, uint8_t g, uint8_t b) {
        uint8_t* p = pixel(u, v);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
    bool empty() const { return data.empty(); }
};

// 16-bit single-channel image (raw depth units).
struct ImageU16 {
    int width = 0;
    int height = 0;
    std::vector<uint16_t> data;  // width*height

    ImageU16() = default;
    ImageU16(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h, 0) {}

    uint16_t& at(int u, int v) { return data[static_cast<size_t>(v) * width + u]; }
    uint16_t at(int u, int v) const { return data[static_cast<size_t>(v) * width + u]; }
    bool empty() const { return data.empty(); }
};

ImageU8 read_png_rgb8(const std::string& path);
ImageU16 read_png_gray16(const std::string& path);
void write_png_rgb8(const std::string& path, const ImageU8& img);
void write_png_gray16(const std::string& path, const ImageU16& img);

// Crop to the half-open pixel rectangle [x0,x1) x [y0,y1); clamped to bounds.
ImageU8 crop(const ImageU8& img, int x0, int y0, int x1, int y1);

// Fixture tagging: a short ASCII id written into the first pixel row so that the
// offline mock provider can recognize an image without any model inference.
void embed_image_id(ImageU8& img, const std::string& id);
// Returns empty string when no id marker is present.
std::string extract_image_id(const ImageU8& img);

}  // namespace keysg
