#include "keysg/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <memory>

#include "keysg/errors.hpp"

namespace keysg {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

FilePtr open_or_throw(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw Error(ErrorCode::MissingFile, "cannot open " + path);
    return f;
}

void begin_read(PngReader& r, FILE* f, const std::string& path) {
    png_byte header[8];
    if (std::fread(header, 1, 8, f) != 8 || png_sig_cmp(header, 0, 8) != 0)
        throw Error(ErrorCode::MissingFile, "not a PNG file: " + path);
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = png_create_info_struct(r.png);
    if (!r.png || !r.info) throw Error(ErrorCode::MissingFile, "libpng init failed");
    png_init_io(r.png, f);
    png_set_sig_bytes(r.png, 8);
    png_read_info(r.png, r.info);
}

}  // namespace

ImageU8 read_png_rgb8(const std::string& path) {
    FilePtr f = open_or_throw(path, "rb");
    PngReader r;
    begin_read(r, f.get(), path);
    if (setjmp(png_jmpbuf(r.png))) throw Error(ErrorCode::MissingFile, "PNG read error: " + path);

    png_set_expand(r.png);
    png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);

    ImageU8 img(static_cast<int>(png_get_image_width(r.png, r.info)),
                static_cast<int>(png_get_image_height(r.png, r.info)));
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = img.data.data() + static_cast<size_t>(y) * img.width * 3;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

ImageU16 read_png_gray16(const std::string& path) {
    FilePtr f = open_or_throw(path, "rb");
    PngReader r;
    begin_read(r, f.get(), path);
    if (setjmp(png_jmpbuf(r.png))) throw Error(ErrorCode::MissingFile, "PNG read error: " + path);

    int color = png_get_color_type(r.png, r.info);
    if (color != PNG_COLOR_TYPE_GRAY)
        throw Error(ErrorCode::BadIntrinsics, "depth PNG must be grayscale: " + path);
    int depth = png_get_bit_depth(r.png, r.info);
    if (depth < 16) png_set_expand_16(r.png);
    png_read_update_info(r.png, r.info);

    ImageU16 img(static_cast<int>(png_get_image_width(r.png, r.info)),
                 static_cast<int>(png_get_image_height(r.png, r.info)));
    std::vector<std::vector<png_byte>> raw(img.height, std::vector<png_byte>(img.width * 2));
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = raw[y].data();
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            img.at(x, y) = static_cast<uint16_t>((raw[y][2 * x] << 8) | raw[y][2 * x + 1]);
    return img;
}

void write_png_rgb8(const std::string& path, const ImageU8& img) {
    FilePtr f = open_or_throw(path, "wb");
    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    w.info = png_create_info_struct(w.png);
    if (!w.png || !w.info) throw Error(ErrorCode::MissingFile, "libpng init failed");
    if (setjmp(png_jmpbuf(w.png))) throw Error(ErrorCode::MissingFile, "PNG write error: " + path);
    png_init_io(w.png, f.get());
    png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width * 3);
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

void write_png_gray16(const std::string& path, const ImageU16& img) {
    FilePtr f = open_or_throw(path, "wb");
    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    w.info = png_create_info_struct(w.png);
    if (!w.png || !w.info) throw Error(ErrorCode::MissingFile, "libpng init failed");
    if (setjmp(png_jmpbuf(w.png))) throw Error(ErrorCode::MissingFile, "PNG write error: " + path);
    png_init_io(w.png, f.get());
    png_set_IHDR(w.png, w.info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    // PNG stores 16-bit samples big-endian.
    std::vector<std::vector<png_byte>> raw(img.height, std::vector<png_byte>(img.width * 2));
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            uint16_t v = img.at(x, y);
            raw[y][2 * x] = static_cast<png_byte>(v >> 8);
            raw[y][2 * x + 1] = static_cast<png_byte>(v & 0xff);
        }
        rows[y] = raw[y].data();
    }
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

ImageU8 crop(const ImageU8& img, int x0, int y0, int x1, int y1) {
    x0 = std::clamp(x0, 0, img.width);
    x1 = std::clamp(x1, x0, img.width);
    y0 = std::clamp(y0, 0, img.height);
    y1 = std::clamp(y1, y0, img.height);
    ImageU8 out(x1 - x0, y1 - y0);
    for (int y = y0; y < y1; ++y)
        std::memcpy(out.data.data() + static_cast<size_t>(y - y0) * out.width * 3,
                    img.pixel(x0, y), static_cast<size_t>(out.width) * 3);
    return out;
}

namespace {
constexpr uint8_t kIdMagic[4] = {'K', 'S', 'G', '!'};
}

void embed_image_id(ImageU8& img, const std::string& id) {
    const int need = 4 + 2 + static_cast<int>(id.size());
    if (img.width < need || img.height < 1)
        throw Error(ErrorCode::InvalidArgument, "image too small for id: " + id);
    for (int i = 0; i < 4; ++i) img.set_pixel(i, 0, kIdMagic[i], kIdMagic[i], kIdMagic[i]);
    uint16_t len = static_cast<uint16_t>(id.size());
    img.set_pixel(4, 0, static_cast<uint8_t>(len >> 8), 0, 0);
    img.set_pixel(5, 0, static_cast<uint8_t>(len & 0xff), 0, 0);
    for (size_t i = 0; i < id.size(); ++i) {
        uint8_t c = static_cast<uint8_t>(id[i]);
        img.set_pixel(static_cast<int>(6 + i), 0, c, c, c);
    }
}

std::string extract_image_id(const ImageU8& img) {
    if (img.width < 6 || img.height < 1) return {};
    for (int i = 0; i < 4; ++i)
        if (img.pixel(i, 0)[0] != kIdMagic[i]) return {};
    int len = (img.pixel(4, 0)[0] << 8) | img.pixel(5, 0)[0];
    if (len <= 0 || 6 + len > img.width) return {};
    std::string id(static_cast<size_t>(len), '\0');
    for (int i = 0; i < len; ++i) id[static_cast<size_t>(i)] = static_cast<char>(img.pixel(6 + i, 0)[0]);
    return id;
}

}  // namespace keysg
