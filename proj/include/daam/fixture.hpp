#pragma once

// Synthetic dump directories for tests and demos. Everything is derived from
// the seed through xoshiro256** so the output bytes are platform independent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "daam/error.hpp"
#include "daam/png_io.hpp"
#include "daam/rng.hpp"
#include "daam/tensor_store.hpp"

namespace daam {

enum class FixtureKind { random, hot_square };

struct FixtureSpec {
    FixtureKind kind = FixtureKind::random;
    std::uint32_t layers = 3;
    std::uint32_t steps = 5;
    std::uint64_t seed = 1;
    std::uint32_t context_length = 16;
    std::uint32_t latent_size = 16;
    std::uint32_t pixels_per_latent = 4;
    double logit_scale = 3.0;  // spread of the random logits
};

/// Square region (image pixels) that receives the hot token's attention.
struct HotSquare {
    std::uint32_t token_index = 0;
    std::string word;
    std::uint32_t row0 = 0;
    std::uint32_t col0 = 0;
    std::uint32_t size = 0;

    bool contains(std::size_t r, std::size_t c) const {
        return r >= row0 && r < row0 + size && c >= col0 && c < col0 + size;
    }
};

namespace detail {

// "strawberries and bananas beside a teapot ." with multi-token words.
inline std::vector<TokenRecord> fixture_tokens(std::uint32_t context_length) {
    struct Tok {
        const char* text;
        int word;
        const char* pos;
    };
    static const Tok words[] = {{"straw", 0, "NOUN"}, {"berries", 0, "NOUN"}, {"and", 1, "CCONJ"},
                                {"ban", 2, "NOUN"},   {"an", 2, "NOUN"},      {"as", 2, "NOUN"},
                                {"beside", 3, "ADP"}, {"a", 4, "DET"},        {"teapot", 5, "NOUN"},
                                {".", 6, "PUNCT"}};
    constexpr std::uint32_t needed = 2 + std::size(words);
    if (context_length < needed)
        throw Error(ErrorKind::OutOfRange, "fixture needs context_length >= " + std::to_string(needed));
    std::vector<TokenRecord> out;
    out.push_back({"<|startoftext|>", 0, std::nullopt, std::nullopt, true});
    std::uint32_t idx = 1;
    for (const auto& t : words)
        out.push_back({t.text, idx++, static_cast<std::uint32_t>(t.word), std::string(t.pos), false});
    out.push_back({"<|endoftext|>", idx++, std::nullopt, std::nullopt, true});
    while (idx < context_length) out.push_back({"<pad>", idx++, std::nullopt, std::nullopt, true});
    return out;
}

inline std::vector<std::int64_t> fixture_timesteps(std::uint32_t steps) {
    // Descending, like a sampler schedule; consumers iterate ascending.
    std::vector<std::int64_t> ts;
    const std::int64_t stride = std::max<std::int64_t>(1, 1000 / steps);
    for (std::uint32_t k = 0; k < steps; ++k) ts.push_back(std::int64_t(steps - 1 - k) * stride + 1);
    return ts;
}

inline LayerDescriptor make_layer(std::string id, Direction dir, std::uint32_t scale, std::uint32_t latent) {
    const std::uint32_t dim = (latent + scale - 1) / scale;
    return LayerDescriptor{std::move(id), dir, scale, dim, dim};
}

// Down blocks get scale 2^i, an odd middle block is "mid", up blocks mirror.
inline std::vector<LayerDescriptor> random_layers(std::uint32_t n, std::uint32_t latent) {
    std::vector<LayerDescriptor> out;
    auto scale_at = [latent](std::uint32_t level) { return std::min<std::uint32_t>(1u << std::min(level, 20u), latent); };
    const std::uint32_t half = n / 2;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (i < half)
            out.push_back(make_layer("down_" + std::to_string(i), Direction::down, scale_at(i), latent));
        else if (n % 2 == 1 && i == half)
            out.push_back(make_layer("mid_" + std::to_string(i), Direction::mid, scale_at(i), latent));
        else
            out.push_back(make_layer("up_" + std::to_string(i), Direction::up, scale_at(n - 1 - i), latent));
    }
    return out;
}

inline std::vector<float> softmax_cell(std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto& v : logits) sum += (v = std::exp(v - mx));
    std::vector<float> out(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) out[k] = static_cast<float>(logits[k] / sum);
    return out;
}

inline RgbImage fixture_image(std::uint32_t h, std::uint32_t w) {
    RgbImage img(h, w);
    for (std::uint32_t r = 0; r < h; ++r)
        for (std::uint32_t c = 0; c < w; ++c) {
            auto* px = img.pixel(r, c);
            px[0] = static_cast<std::uint8_t>(64 + (r * 128) / std::max(1u, h));
            px[1] = static_cast<std::uint8_t>(64 + (c * 128) / std::max(1u, w));
            px[2] = 160;
        }
    return img;
}

} // namespace detail

struct Fixture {
    DumpManifest manifest;
    std::vector<AttentionSlice> slices;  // canonical order
    std::optional<HotSquare> square;
    RgbImage image;
};

/// Builds a fixture in memory.
///
/// random: every cell's token distribution is the softmax of uniform logits
/// in [0, logit_scale).
/// hot_square: six layers (scales 1, 2, 4 down and up) over a 16x16 latent;
/// the "teapot" token gets +4 on its logit in every cell whose receptive
/// field lies inside the central half-size square, and the start token a
/// constant +2 everywhere, so the aggregated teapot map peaks on the square.
inline Fixture make_fixture(const FixtureSpec& spec) {
    if (spec.layers == 0 && spec.kind == FixtureKind::random)
        throw Error(ErrorKind::OutOfRange, "fixture needs at least one layer");
    if (spec.steps == 0) throw Error(ErrorKind::OutOfRange, "fixture needs at least one step");
    if (spec.latent_size == 0 || spec.pixels_per_latent == 0)
        throw Error(ErrorKind::OutOfRange, "latent size and pixel factor must be positive");

    Fixture fx;
    auto& m = fx.manifest;
    m.prompt = "strawberries and bananas beside a teapot.";
    m.context_length = spec.context_length;
    m.latent_height = m.latent_width = spec.latent_size;
    m.image_height = m.image_width = spec.latent_size * spec.pixels_per_latent;
    m.heads_averaged = true;
    m.conditional_pass_only = true;
    m.tokens = detail::fixture_tokens(spec.context_length);
    m.timesteps = detail::fixture_timesteps(spec.steps);

    if (spec.kind == FixtureKind::hot_square) {
        if (spec.latent_size % 8 != 0) throw Error(ErrorKind::OutOfRange, "hot-square fixture needs latent size % 8 == 0");
        const std::uint32_t L = spec.latent_size;
        for (std::uint32_t s : {1u, 2u, 4u})
            m.layers.push_back(detail::make_layer("down_s" + std::to_string(s), Direction::down, s, L));
        for (std::uint32_t s : {4u, 2u, 1u})
            m.layers.push_back(detail::make_layer("up_s" + std::to_string(s), Direction::up, s, L));
        const std::uint32_t img = m.image_height;
        fx.square = HotSquare{9, "teapot", img / 4, img / 4, img / 2};
    } else {
        m.layers = detail::random_layers(spec.layers, spec.latent_size);
    }
    check_manifest(m);

    Xoshiro256StarStar rng(spec.seed);
    const std::uint32_t L = m.context_length;
    std::vector<double> logits(L);
    for (const auto& key : canonical_order(m)) {
        const auto& layer = m.layers[key.layer];
        AttentionSlice s{layer.layer_id, key.timestep, layer.slice_height, layer.slice_width, L, {}};
        s.data.reserve(std::size_t(s.height) * s.width * L);
        const std::uint32_t stride = layer.scale_factor * spec.pixels_per_latent;
        for (std::uint32_t r = 0; r < s.height; ++r)
            for (std::uint32_t c = 0; c < s.width; ++c) {
                for (auto& v : logits) v = rng.uniform() * spec.logit_scale;
                if (fx.square) {
                    logits[0] += 2.0;
                    const std::size_t cy = std::size_t(r) * stride + stride / 2;
                    const std::size_t cx = std::size_t(c) * stride + stride / 2;
                    if (fx.square->contains(cy, cx)) logits[fx.square->token_index] += 4.0;
                }
                const auto probs = detail::softmax_cell(logits);
                s.data.insert(s.data.end(), probs.begin(), probs.end());
            }
        fx.slices.push_back(std::move(s));
    }
    fx.image = detail::fixture_image(m.image_height, m.image_width);
    return fx;
}

/// Writes manifest.json, every slice, image.png and, for hot-square
/// fixtures, fixture.json describing the square.
inline void write_fixture(const Fixture& fx, const std::filesystem::path& dir) {
    write_manifest(fx.manifest, dir);
    for (const auto& s : fx.slices) write_slice(s, dir);
    write_png_rgb(dir / "image.png", fx.image);
    if (fx.square) {
        nlohmann::ordered_json j;
        j["kind"] = "hot-square";
        j["token_index"] = fx.square->token_index;
        j["word"] = fx.square->word;
        j["row0"] = fx.square->row0;
        j["col0"] = fx.square->col0;
        j["size"] = fx.square->size;
        std::ofstream out(dir / "fixture.json", std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoFailure, "cannot write fixture.json");
        out << j.dump(2) << "\n";
    }
}

inline HotSquare read_hot_square(const std::filesystem::path& dir) {
    std::ifstream in(dir / "fixture.json");
    if (!in) throw Error(ErrorKind::IoFailure, "no fixture.json in " + dir.string());
    nlohmann::json j;
    in >> j;
    return HotSquare{j.at("token_index").get<std::uint32_t>(), j.at("word").get<std::string>(),
                     j.at("row0").get<std::uint32_t>(), j.at("col0").get<std::uint32_t>(),
                     j.at("size").get<std::uint32_t>()};
}

} // namespace daam
