#pragma once

// Minimal PNG reading/writing over libpng. Writers use fixed encoder settings
// and emit no time or text chunks, so identical pixels give identical bytes.

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "daam/error.hpp"
#include "daam/grid.hpp"

namespace daam {

/// 8-bit interleaved RGB image.
struct RgbImage {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(std::uint32_t h, std::uint32_t w, std::uint8_t fill = 0) : height(h), width(w), data(std::size_t(h) * w * 3, fill) {}

    std::uint8_t* pixel(std::size_t row, std::size_t col) { return &data[(row * width + col) * 3]; }
    const std::uint8_t* pixel(std::size_t row, std::size_t col) const { return &data[(row * width + col) * 3]; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

namespace detail {

struct PngRaw {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::uint8_t> bytes;
    std::vector<png_bytep> rows;
    char message[256] = {};
};

inline void png_error_to_buffer(png_structp png, png_const_charp msg) {
    auto* raw = static_cast<PngRaw*>(png_get_error_ptr(png));
    std::snprintf(raw->message, sizeof raw->message, "%s", msg);
    png_longjmp(png, 1);
}

inline void png_warning_ignore(png_structp, png_const_charp) {}

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// keep_16: leave 16-bit samples untouched (big-endian in raw.bytes).
// to_rgb: expand grey to RGB; otherwise RGB input stays RGB.
inline bool png_decode(std::FILE* fp, PngRaw& raw, bool keep_16, bool to_rgb) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &raw, png_error_to_buffer, png_warning_ignore);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (!keep_16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (to_rgb) png_set_gray_to_rgb(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    raw.width = png_get_image_width(png, info);
    raw.height = png_get_image_height(png, info);
    raw.channels = png_get_channels(png, info);
    raw.bit_depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    raw.bytes.resize(stride * raw.height);
    raw.rows.resize(raw.height);
    for (std::uint32_t r = 0; r < raw.height; ++r) raw.rows[r] = raw.bytes.data() + r * stride;
    png_read_image(png, raw.rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

inline bool png_encode(std::FILE* fp, PngRaw& raw, int color_type) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &raw, png_error_to_buffer, png_warning_ignore);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, fp);
    png_set_compression_level(png, 9);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_set_IHDR(png, info, raw.width, raw.height, raw.bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, raw.rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

inline PngRaw read_png_raw(const std::filesystem::path& path, bool keep_16, bool to_rgb) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    PngRaw raw;
    if (!png_decode(fp.get(), raw, keep_16, to_rgb))
        throw Error(ErrorKind::IoFailure, path.string() + ": " + (raw.message[0] ? raw.message : "invalid PNG"));
    return raw;
}

inline void write_png_raw(const std::filesystem::path& path, PngRaw& raw, int color_type) {
    const std::size_t stride = raw.bytes.size() / (raw.height ? raw.height : 1);
    raw.rows.resize(raw.height);
    for (std::uint32_t r = 0; r < raw.height; ++r) raw.rows[r] = raw.bytes.data() + r * stride;
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw Error(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
    if (!png_encode(fp.get(), raw, color_type))
        throw Error(ErrorKind::IoFailure, path.string() + ": " + (raw.message[0] ? raw.message : "PNG encode failed"));
    if (std::fflush(fp.get()) != 0) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

} // namespace detail

/// Any PNG, converted to 8-bit RGB (alpha dropped, palettes expanded).
inline RgbImage read_png_rgb(const std::filesystem::path& path) {
    auto raw = detail::read_png_raw(path, false, true);
    RgbImage img;
    img.height = raw.height;
    img.width = raw.width;
    img.data = std::move(raw.bytes);
    return img;
}

/// Any PNG as a binary mask: a pixel is set when any colour channel is non-zero.
inline Mask read_png_mask(const std::filesystem::path& path) {
    auto raw = detail::read_png_raw(path, false, false);
    Mask mask(raw.height, raw.width, 0);
    const int ch = raw.channels;
    for (std::size_t r = 0; r < raw.height; ++r)
        for (std::size_t c = 0; c < raw.width; ++c) {
            bool on = false;
            for (int k = 0; k < ch; ++k) on |= raw.bytes[(r * raw.width + c) * ch + k] != 0;
            mask(r, c) = on ? 1 : 0;
        }
    return mask;
}

/// 16-bit greyscale PNG samples; throws unless the file is 16-bit grey.
inline Grid<std::uint16_t> read_png_gray16(const std::filesystem::path& path) {
    auto raw = detail::read_png_raw(path, true, false);
    if (raw.channels != 1 || raw.bit_depth != 16)
        throw Error(ErrorKind::IoFailure, path.string() + ": expected 16-bit greyscale");
    Grid<std::uint16_t> out(raw.height, raw.width);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values()[i] = static_cast<std::uint16_t>((raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1]);
    return out;
}

inline void write_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
    detail::PngRaw raw;
    raw.width = img.width;
    raw.height = img.height;
    raw.bit_depth = 8;
    raw.bytes = img.data;
    detail::write_png_raw(path, raw, PNG_COLOR_TYPE_RGB);
}

inline void write_png_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& img) {
    detail::PngRaw raw;
    raw.width = static_cast<std::uint32_t>(img.width());
    raw.height = static_cast<std::uint32_t>(img.height());
    raw.bit_depth = 8;
    raw.bytes.assign(img.begin(), img.end());
    detail::write_png_raw(path, raw, PNG_COLOR_TYPE_GRAY);
}

inline void write_png_gray16(const std::filesystem::path& path, const Grid<std::uint16_t>& img) {
    detail::PngRaw raw;
    raw.width = static_cast<std::uint32_t>(img.width());
    raw.height = static_cast<std::uint32_t>(img.height());
    raw.bit_depth = 16;
    raw.bytes.reserve(img.size() * 2);
    for (auto v : img) {
        raw.bytes.push_back(static_cast<std::uint8_t>(v >> 8));
        raw.bytes.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
    detail::write_png_raw(path, raw, PNG_COLOR_TYPE_GRAY);
}

} // namespace daam
