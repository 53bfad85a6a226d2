#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "daam/error.hpp"
#include "daam/grid.hpp"
#include "daam/tensor_store.hpp"

namespace daam {

enum class UpscaleMode { sum_preserving_deconv, bicubic };

struct UpscaleSpec {
    UpscaleMode mode = UpscaleMode::sum_preserving_deconv;
    std::uint32_t scale_factor = 1;
    std::uint32_t target_height = 0;
    std::uint32_t target_width = 0;
};

namespace detail {

inline void check_upscale(std::size_t in_h, std::size_t in_w, const UpscaleSpec& spec) {
    if (spec.scale_factor == 0) throw Error(ErrorKind::ShapeOverflow, "scale factor must be >= 1");
    if (in_h == 0 || in_w == 0) throw Error(ErrorKind::ShapeOverflow, "empty input grid");
    const std::uint64_t s = spec.scale_factor;
    // The target must be covered by the strided output and the crop may drop
    // at most a partial stride on each axis.
    auto fits = [s](std::uint64_t in, std::uint64_t target) { return in * s >= target && (in - 1) * s < target; };
    if (!fits(in_h, spec.target_height) || !fits(in_w, spec.target_width))
        throw Error(ErrorKind::ShapeOverflow, std::to_string(in_h) + "x" + std::to_string(in_w) + " at stride " +
                                                  std::to_string(s) + " cannot produce " +
                                                  std::to_string(spec.target_height) + "x" +
                                                  std::to_string(spec.target_width));
}

inline void check_non_negative(const Grid<double>& g) {
    for (double v : g)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error(ErrorKind::ValueRangeViolation, "upscale input must be finite and non-negative");
}

// Transposed convolution with a constant s x s filter of 1/s^2, added into acc.
inline void add_deconv(Grid<double>& acc, const Grid<double>& in, std::uint32_t s) {
    const double w = 1.0 / (double(s) * double(s));
    const std::size_t H = acc.height(), W = acc.width();
    for (std::size_t r = 0; r < in.height(); ++r) {
        const std::size_t r0 = r * s, r1 = std::min<std::size_t>(r0 + s, H);
        for (std::size_t c = 0; c < in.width(); ++c) {
            const double v = in(r, c) * w;
            const std::size_t c0 = c * s, c1 = std::min<std::size_t>(c0 + s, W);
            for (std::size_t y = r0; y < r1; ++y)
                for (std::size_t x = c0; x < c1; ++x)
                    acc(y, x) += v;
        }
    }
}

} // namespace detail

/// Catmull-Rom cubic convolution kernel (Keys, a = -0.5).
inline double cubic_kernel(double x) noexcept {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

/// Stride-s transposed convolution with filter entries 1/s^2: each input cell
/// spreads its value evenly over the s x s output block at (row*s, col*s).
/// Output is cropped bottom/right to the target dims. Mass is preserved
/// exactly when no crop occurs.
inline Grid<double> upscale_deconv(const Grid<double>& slice, const UpscaleSpec& spec) {
    detail::check_upscale(slice.height(), slice.width(), spec);
    detail::check_non_negative(slice);
    Grid<double> out(spec.target_height, spec.target_width, 0.0);
    detail::add_deconv(out, slice, spec.scale_factor);
    return out;
}

/// Bicubic resampling at integer factor s with half-pixel-centred sampling:
/// output (y, x) reads the source at ((y + 0.5) / s - 0.5, (x + 0.5) / s - 0.5).
/// Taps outside the grid clamp to the edge; negative ringing is clipped to 0.
/// Not mass-preserving.
inline Grid<double> upscale_bicubic(const Grid<double>& slice, const UpscaleSpec& spec) {
    detail::check_upscale(slice.height(), slice.width(), spec);
    detail::check_non_negative(slice);
    const double s = spec.scale_factor;

    struct Taps {
        std::array<std::size_t, 4> idx;
        std::array<double, 4> w;
    };
    auto taps_for = [s](std::size_t out, std::size_t n) {
        const double src = (double(out) + 0.5) / s - 0.5;
        const double base = std::floor(src);
        const double t = src - base;
        Taps tp;
        for (int k = 0; k < 4; ++k) {
            const auto i = static_cast<std::int64_t>(base) - 1 + k;
            tp.idx[k] = static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, std::int64_t(n) - 1));
            tp.w[k] = cubic_kernel(t - double(k - 1));
        }
        return tp;
    };

    const std::size_t in_h = slice.height(), in_w = slice.width();
    std::vector<Taps> col_taps(spec.target_width), row_taps(spec.target_height);
    for (std::size_t x = 0; x < spec.target_width; ++x) col_taps[x] = taps_for(x, in_w);
    for (std::size_t y = 0; y < spec.target_height; ++y) row_taps[y] = taps_for(y, in_h);

    Grid<double> horiz(in_h, spec.target_width);
    for (std::size_t r = 0; r < in_h; ++r)
        for (std::size_t x = 0; x < spec.target_width; ++x) {
            const auto& tp = col_taps[x];
            double v = 0.0;
            for (int k = 0; k < 4; ++k) v += tp.w[k] * slice(r, tp.idx[k]);
            horiz(r, x) = v;
        }

    Grid<double> out(spec.target_height, spec.target_width);
    for (std::size_t y = 0; y < spec.target_height; ++y) {
        const auto& tp = row_taps[y];
        for (std::size_t x = 0; x < spec.target_width; ++x) {
            double v = 0.0;
            for (int k = 0; k < 4; ++k) v += tp.w[k] * horiz(tp.idx[k], x);
            out(y, x) = std::max(v, 0.0);
        }
    }
    return out;
}

inline Grid<double> upscale(const Grid<double>& slice, const UpscaleSpec& spec) {
    return spec.mode == UpscaleMode::bicubic ? upscale_bicubic(slice, spec) : upscale_deconv(slice, spec);
}

// ---------------------------------------------------------------------------
// Aggregation

/// Which block directions contribute to a heat map.
struct LayerFilter {
    bool down = true;
    bool up = true;
    bool mid = true;

    bool accepts(Direction d) const noexcept {
        switch (d) {
        case Direction::down: return down;
        case Direction::up: return up;
        case Direction::mid: return mid;
        }
        return false;
    }

    static LayerFilter all() noexcept { return {}; }
    static LayerFilter none() noexcept { return {false, false, false}; }
};

/// Parses "all" or a comma list of down/up/mid.
inline std::optional<LayerFilter> parse_layer_filter(std::string_view text) {
    if (text == "all") return LayerFilter::all();
    LayerFilter f = LayerFilter::none();
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        if (item == "all") f = LayerFilter::all();
        else if (auto d = parse_direction(item)) {
            if (*d == Direction::down) f.down = true;
            if (*d == Direction::up) f.up = true;
            if (*d == Direction::mid) f.mid = true;
        } else
            return std::nullopt;
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return f;
}

struct AggregateOptions {
    UpscaleMode mode = UpscaleMode::sum_preserving_deconv;
    LayerFilter layers = LayerFilter::all();
    ReadOptions read{};
};

enum class SubjectKind { token, word };

struct HeatMap {
    Grid<double> data;
    SubjectKind kind = SubjectKind::token;
    std::uint32_t index = 0;  // token_index or word_index

    double max() const {
        double m = 0.0;
        for (double v : data) m = std::max(m, v);
        return m;
    }
};

struct HardMask {
    Mask data;
    double tau = 0.0;
    double source_max = 0.0;
};

/// Upscale target for one layer of a dump: straight to image resolution.
inline UpscaleSpec layer_upscale_spec(const DumpManifest& m, const LayerDescriptor& layer, UpscaleMode mode) {
    return UpscaleSpec{mode, layer.scale_factor * m.pixels_per_latent(), m.image_height, m.image_width};
}

/// Heat maps for several tokens from one pass over the dump. Each map is
/// D[x, y] = sum over timesteps and selected layers of the upscaled
/// per-token score plane, accumulated in float64 in canonical order, so the
/// result for a token does not depend on which other tokens are requested.
inline std::vector<HeatMap> token_heat_maps(const Dump& dump, std::span<const std::uint32_t> token_indices,
                                            const AggregateOptions& opts = {}) {
    const auto& m = dump.manifest;
    for (auto t : token_indices)
        if (t >= m.context_length)
            throw Error(ErrorKind::OutOfRange,
                        "token_index " + std::to_string(t) + " >= context_length " + std::to_string(m.context_length));

    std::vector<SliceKey> keys;
    for (const auto& key : canonical_order(m))
        if (opts.layers.accepts(m.layers[key.layer].direction)) keys.push_back(key);
    bool any_layer = false;
    for (const auto& l : m.layers) any_layer |= opts.layers.accepts(l.direction);
    if (!any_layer) throw Error(ErrorKind::EmptySelection, "layer filter selects no layers");

    std::vector<HeatMap> maps;
    maps.reserve(token_indices.size());
    for (auto t : token_indices)
        maps.push_back(HeatMap{Grid<double>(m.image_height, m.image_width, 0.0), SubjectKind::token, t});

    for (const auto& item : SliceStream(dump, opts.read, std::move(keys))) {
        const auto spec = layer_upscale_spec(m, *item.layer, opts.mode);
        for (std::size_t i = 0; i < token_indices.size(); ++i) {
            const auto plane = item.slice.token_plane(token_indices[i]);
            auto& acc = maps[i].data;
            if (opts.mode == UpscaleMode::sum_preserving_deconv) {
                detail::check_upscale(plane.height(), plane.width(), spec);
                detail::check_non_negative(plane);
                detail::add_deconv(acc, plane, spec.scale_factor);
            } else {
                const auto up = upscale_bicubic(plane, spec);
                for (std::size_t p = 0; p < acc.size(); ++p) acc.values()[p] += up.values()[p];
            }
        }
    }
    return maps;
}

inline HeatMap token_heat_map(const Dump& dump, std::uint32_t token_index, const AggregateOptions& opts = {}) {
    const std::array<std::uint32_t, 1> one{token_index};
    return std::move(token_heat_maps(dump, one, opts).front());
}

/// Word map = elementwise sum of its token maps, added in token order.
inline HeatMap merge_token_maps(std::span<const HeatMap> token_maps, std::uint32_t word_index) {
    if (token_maps.empty()) throw Error(ErrorKind::UnknownWord, "word " + std::to_string(word_index) + " has no tokens");
    HeatMap out{token_maps.front().data, SubjectKind::word, word_index};
    for (std::size_t i = 1; i < token_maps.size(); ++i) {
        if (!token_maps[i].data.same_shape(out.data)) throw Error(ErrorKind::DimMismatch, "token maps differ in shape");
        auto dst = out.data.values();
        auto src = token_maps[i].data.values();
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += src[p];
    }
    return out;
}

inline HeatMap word_heat_map(const Dump& dump, std::uint32_t word_index, const AggregateOptions& opts = {}) {
    const auto tokens = dump.manifest.tokens_of_word(word_index);
    if (tokens.empty()) throw Error(ErrorKind::UnknownWord, "no token has word_index " + std::to_string(word_index));
    const auto maps = token_heat_maps(dump, tokens, opts);
    return merge_token_maps(maps, word_index);
}

/// Heat maps for several words from a single pass over the dump.
inline std::vector<HeatMap> word_heat_maps(const Dump& dump, std::span<const std::uint32_t> words,
                                           const AggregateOptions& opts = {}) {
    std::vector<std::uint32_t> tokens;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (auto w : words) {
        const auto t = dump.manifest.tokens_of_word(w);
        if (t.empty()) throw Error(ErrorKind::UnknownWord, "no token has word_index " + std::to_string(w));
        ranges.emplace_back(tokens.size(), t.size());
        tokens.insert(tokens.end(), t.begin(), t.end());
    }
    const auto maps = token_heat_maps(dump, tokens, opts);
    std::vector<HeatMap> out;
    out.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i)
        out.push_back(merge_token_maps(std::span(maps).subspan(ranges[i].first, ranges[i].second), words[i]));
    return out;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

/// Word indices whose surface form matches `text`, case-insensitively.
inline std::vector<std::uint32_t> find_words(const DumpManifest& m, std::string_view text) {
    std::vector<std::uint32_t> out;
    const auto needle = to_lower(text);
    for (auto w : m.word_indices())
        if (to_lower(m.word_text(w)) == needle) out.push_back(w);
    return out;
}

// ---------------------------------------------------------------------------
// Thresholding and display

/// Pixel is set iff D >= tau * max(D). An all-zero map yields an empty mask.
inline HardMask threshold(const HeatMap& map, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorKind::OutOfRange, "tau must lie in [0, 1]");
    const double mx = map.max();
    HardMask out{Mask(map.data.height(), map.data.width(), 0), tau, mx};
    if (mx <= 0.0) return out;
    const double cut = tau * mx;
    auto src = map.data.values();
    auto dst = out.data.values();
    for (std::size_t p = 0; p < src.size(); ++p) dst[p] = src[p] >= cut ? 1 : 0;
    return out;
}

/// D / max(D); zero maps stay zero.
inline Grid<double> normalize_for_display(const HeatMap& map) {
    Grid<double> out(map.data.height(), map.data.width(), 0.0);
    const double mx = map.max();
    if (mx <= 0.0) return out;
    auto src = map.data.values();
    auto dst = out.values();
    for (std::size_t p = 0; p < src.size(); ++p) dst[p] = src[p] / mx;
    return out;
}

} // namespace daam
