#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "daam/attribution.hpp"
#include "daam/error.hpp"
#include "daam/png_io.hpp"

namespace daam {

using Rgb = std::array<double, 3>;

struct ColormapAnchor {
    double at = 0.0;
    std::array<std::uint8_t, 3> rgb{};
};

/// Piecewise-linear RGB ramp over [0, 1].
struct Colormap {
    std::string name;
    std::vector<ColormapAnchor> anchors;

    void check() const {
        if (anchors.size() < 2) throw Error(ErrorKind::SchemaViolation, "colormap needs at least two anchors");
        if (anchors.front().at != 0.0 || anchors.back().at != 1.0)
            throw Error(ErrorKind::SchemaViolation, "colormap anchors must start at 0 and end at 1");
        for (std::size_t i = 1; i < anchors.size(); ++i)
            if (!(anchors[i].at > anchors[i - 1].at))
                throw Error(ErrorKind::SchemaViolation, "colormap anchors must be strictly increasing");
    }

    /// {"name": ..., "anchors": [{"at": 0.0, "rgb": [r, g, b]}, ...]}
    static Colormap from_json(const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("anchors") || !j["anchors"].is_array())
            throw Error(ErrorKind::SchemaViolation, "colormap: expected object with an anchors list");
        Colormap cm;
        cm.name = j.value("name", std::string("custom"));
        for (const auto& a : j["anchors"]) {
            if (!a.is_object() || !a.contains("at") || !a["at"].is_number() || !a.contains("rgb") ||
                !a["rgb"].is_array() || a["rgb"].size() != 3)
                throw Error(ErrorKind::SchemaViolation, "colormap anchor: expected {at, rgb[3]}");
            ColormapAnchor anchor;
            anchor.at = a["at"].get<double>();
            for (int k = 0; k < 3; ++k) {
                const auto& c = a["rgb"][k];
                if (!c.is_number_integer() || c.get<int>() < 0 || c.get<int>() > 255)
                    throw Error(ErrorKind::SchemaViolation, "colormap anchor: rgb components must be 0..255");
                anchor.rgb[k] = static_cast<std::uint8_t>(c.get<int>());
            }
            cm.anchors.push_back(anchor);
        }
        cm.check();
        return cm;
    }

    static Colormap load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::IoFailure, "cannot open colormap " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::SchemaViolation, "colormap " + path.string() + ": " + e.what());
        }
        return from_json(j);
    }
};

enum class DrawMode { soft, hard_fill, hard_outline };

inline std::optional<DrawMode> parse_draw_mode(std::string_view s) {
    if (s == "soft") return DrawMode::soft;
    if (s == "hard_fill") return DrawMode::hard_fill;
    if (s == "hard_outline") return DrawMode::hard_outline;
    return std::nullopt;
}

struct OverlaySpec {
    double alpha = 0.6;
    Colormap colormap;
    DrawMode draw_mode = DrawMode::soft;
    std::array<std::uint8_t, 3> highlight{255, 0, 0};

    void check() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::OutOfRange, "alpha must lie in [0, 1]");
    }
};

inline Rgb colormap_lookup(double v, const Colormap& cm) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::OutOfRange, "colormap input must lie in [0, 1]");
    const auto& a = cm.anchors;
    auto exact = [](const ColormapAnchor& x) { return Rgb{double(x.rgb[0]), double(x.rgb[1]), double(x.rgb[2])}; };
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        if (v == a[i].at) return exact(a[i]);
        if (v < a[i + 1].at) {
            const double t = (v - a[i].at) / (a[i + 1].at - a[i].at);
            Rgb out;
            for (int k = 0; k < 3; ++k) out[k] = a[i].rgb[k] + t * (double(a[i + 1].rgb[k]) - double(a[i].rgb[k]));
            return out;
        }
    }
    return exact(a.back());
}

namespace detail {

inline std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

inline void check_dims(const RgbImage& img, std::size_t h, std::size_t w) {
    if (img.height != h || img.width != w)
        throw Error(ErrorKind::DimMismatch, "image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                                                " vs map " + std::to_string(h) + "x" + std::to_string(w));
}

inline void blend_pixel(std::uint8_t* px, double weight, const Rgb& color) {
    for (int k = 0; k < 3; ++k) px[k] = to_byte((1.0 - weight) * px[k] + weight * color[k]);
}

} // namespace detail

/// Attention-weighted blend: out = (1 - a*v) * image + a*v * colormap(v),
/// with v the display-normalised map value. Unattended pixels are unchanged.
inline RgbImage render_soft(const RgbImage& image, const HeatMap& map, const OverlaySpec& spec) {
    spec.check();
    detail::check_dims(image, map.data.height(), map.data.width());
    const auto norm = normalize_for_display(map);
    RgbImage out = image;
    for (std::size_t r = 0; r < out.height; ++r)
        for (std::size_t c = 0; c < out.width; ++c) {
            const double v = norm(r, c);
            const double weight = spec.alpha * v;
            if (weight == 0.0) continue;
            detail::blend_pixel(out.pixel(r, c), weight, colormap_lookup(v, spec.colormap));
        }
    return out;
}

/// Set pixels with at least one 4-neighbour unset or outside the grid.
inline Mask mask_outline(const Mask& mask) {
    Mask out(mask.height(), mask.width(), 0);
    const auto H = mask.height(), W = mask.width();
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
            if (!mask(r, c)) continue;
            const bool edge = r == 0 || c == 0 || r + 1 == H || c + 1 == W || !mask(r - 1, c) || !mask(r + 1, c) ||
                              !mask(r, c - 1) || !mask(r, c + 1);
            out(r, c) = edge ? 1 : 0;
        }
    return out;
}

/// hard_fill blends the highlight colour at alpha over every masked pixel;
/// hard_outline does the same over the mask's 4-connected boundary only.
inline RgbImage render_hard(const RgbImage& image, const HardMask& mask, const OverlaySpec& spec) {
    spec.check();
    detail::check_dims(image, mask.data.height(), mask.data.width());
    const Mask& target = spec.draw_mode == DrawMode::hard_outline ? mask_outline(mask.data) : mask.data;
    const Rgb color{double(spec.highlight[0]), double(spec.highlight[1]), double(spec.highlight[2])};
    RgbImage out = image;
    if (spec.alpha == 0.0) return out;
    for (std::size_t r = 0; r < out.height; ++r)
        for (std::size_t c = 0; c < out.width; ++c)
            if (target(r, c)) detail::blend_pixel(out.pixel(r, c), spec.alpha, color);
    return out;
}

} // namespace daam
