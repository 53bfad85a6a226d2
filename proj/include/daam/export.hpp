#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "daam/attribution.hpp"
#include "daam/png_io.hpp"
#include "daam/tensor_store.hpp"

namespace daam {

/// Soft map as a single-channel .attn file (float32, L = 1).
inline void write_heat_map_attn(const HeatMap& map, const std::filesystem::path& path) {
    std::vector<float> data(map.data.begin(), map.data.end());
    write_attn_file(path, static_cast<std::uint32_t>(map.data.height()), static_cast<std::uint32_t>(map.data.width()),
                    1, data);
}

/// Display-normalised map quantised to 16 bits: round(65535 * D / max D).
inline Grid<std::uint16_t> quantize_heat_map(const HeatMap& map) {
    const auto norm = normalize_for_display(map);
    Grid<std::uint16_t> out(norm.height(), norm.width());
    for (std::size_t i = 0; i < norm.size(); ++i)
        out.values()[i] = static_cast<std::uint16_t>(std::lround(65535.0 * norm.values()[i]));
    return out;
}

inline void write_heat_map_png(const HeatMap& map, const std::filesystem::path& path) {
    write_png_gray16(path, quantize_heat_map(map));
}

/// Hard mask as 8-bit greyscale, 255 inside and 0 outside.
inline void write_mask_png(const Mask& mask, const std::filesystem::path& path) {
    Grid<std::uint8_t> img(mask.height(), mask.width(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) img.values()[i] = mask.values()[i] ? 255 : 0;
    write_png_gray8(path, img);
}

} // namespace daam
