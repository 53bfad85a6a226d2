#pragma once

// Attention dump directories: manifest.json plus one .attn file per
// (layer, timestep). Format reference lives in docs/format.md.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "daam/error.hpp"
#include "daam/grid.hpp"

namespace daam {

namespace fs = std::filesystem;

inline constexpr int kManifestVersion = 1;
inline constexpr std::string_view kManifestFormat = "daam-dump";
inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::array<char, 8> kAttnMagic = {'D', 'A', 'A', 'M', 'A', 'T', 'T', 'N'};
inline constexpr std::uint8_t kAttnVersion = 1;
inline constexpr std::size_t kAttnHeaderBytes = 24;
inline constexpr double kRowSumTolerance = 1e-3;

enum class Direction { down, up, mid };

inline std::string_view to_string(Direction d) noexcept {
    switch (d) {
    case Direction::down: return "down";
    case Direction::up: return "up";
    case Direction::mid: return "mid";
    }
    return "down";
}

inline std::optional<Direction> parse_direction(std::string_view s) noexcept {
    if (s == "down") return Direction::down;
    if (s == "up") return Direction::up;
    if (s == "mid") return Direction::mid;
    return std::nullopt;
}

struct LayerDescriptor {
    std::string layer_id;
    Direction direction = Direction::down;
    std::uint32_t scale_factor = 1;  // relative to the latent grid
    std::uint32_t slice_height = 0;
    std::uint32_t slice_width = 0;

    friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

struct TokenRecord {
    std::string text;
    std::uint32_t token_index = 0;
    std::optional<std::uint32_t> word_index;
    std::optional<std::string> pos_tag;
    bool is_special = false;

    friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

struct DumpManifest {
    int version = kManifestVersion;
    std::string prompt;
    std::optional<std::string> image_id;
    std::uint32_t context_length = 0;
    std::uint32_t image_height = 0;
    std::uint32_t image_width = 0;
    std::uint32_t latent_height = 0;
    std::uint32_t latent_width = 0;
    bool heads_averaged = true;
    std::optional<bool> conditional_pass_only;
    std::vector<std::int64_t> timesteps;
    std::vector<LayerDescriptor> layers;
    std::vector<TokenRecord> tokens;

    const LayerDescriptor* find_layer(std::string_view id) const noexcept {
        for (const auto& l : layers)
            if (l.layer_id == id) return &l;
        return nullptr;
    }

    bool has_timestep(std::int64_t t) const noexcept {
        return std::find(timesteps.begin(), timesteps.end(), t) != timesteps.end();
    }

    /// Pixels per latent cell (the VAE factor); identical on both axes.
    std::uint32_t pixels_per_latent() const noexcept {
        return latent_height == 0 ? 0 : image_height / latent_height;
    }

    std::vector<std::int64_t> timesteps_ascending() const {
        auto ts = timesteps;
        std::sort(ts.begin(), ts.end());
        return ts;
    }

    /// Distinct word indices in order of first appearance.
    std::vector<std::uint32_t> word_indices() const {
        std::vector<std::uint32_t> out;
        for (const auto& t : tokens)
            if (t.word_index && (out.empty() || out.back() != *t.word_index))
                out.push_back(*t.word_index);
        return out;
    }

    std::vector<std::uint32_t> tokens_of_word(std::uint32_t word) const {
        std::vector<std::uint32_t> out;
        for (const auto& t : tokens)
            if (t.word_index == word) out.push_back(t.token_index);
        return out;
    }

    /// Surface form of a word: its token texts concatenated.
    std::string word_text(std::uint32_t word) const {
        std::string s;
        for (const auto& t : tokens)
            if (t.word_index == word) s += t.text;
        return s;
    }

    /// POS tag of a word, taken from its first tagged token.
    std::optional<std::string> word_pos(std::uint32_t word) const {
        for (const auto& t : tokens)
            if (t.word_index == word && t.pos_tag) return t.pos_tag;
        return std::nullopt;
    }

    friend bool operator==(const DumpManifest&, const DumpManifest&) = default;
};

struct AttentionSlice {
    std::string layer_id;
    std::int64_t timestep = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t tokens = 0;
    std::vector<float> data;  // [row][col][token]

    float at(std::size_t row, std::size_t col, std::size_t token) const {
        return data[(row * width + col) * tokens + token];
    }

    /// One token's spatial plane, widened to double.
    Grid<double> token_plane(std::size_t token) const {
        Grid<double> out(height, width);
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c)
                out(r, c) = at(r, c, token);
        return out;
    }

    friend bool operator==(const AttentionSlice&, const AttentionSlice&) = default;
};

struct ReadOptions {
    bool validate = true;
    double row_sum_tolerance = kRowSumTolerance;
};

/// Raw contents of one .attn file.
struct AttnArray {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    std::vector<float> data;
};

namespace detail {

inline void put_u32_le(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

inline std::string read_file_bytes(const fs::path& path, ErrorKind missing_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(missing_kind, "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

inline bool valid_layer_id(std::string_view id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
               c == '-' || c == '.';
    });
}

using nlohmann::json;

[[noreturn]] inline void schema_error(const std::string& field, const std::string& what) {
    throw Error(ErrorKind::SchemaViolation, field + ": " + what);
}

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(where + key, "missing required field");
    return *it;
}

inline std::uint32_t get_positive(const json& obj, const std::string& key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_number_integer() || v.get<std::int64_t>() <= 0 || v.get<std::int64_t>() > UINT32_MAX)
        schema_error(where + key, "expected positive integer");
    return v.get<std::uint32_t>();
}

inline std::uint32_t get_index(const json& v, const std::string& field) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::int64_t>() > UINT32_MAX)
        schema_error(field, "expected non-negative integer");
    return v.get<std::uint32_t>();
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_string()) schema_error(where + key, "expected string");
    return v.get<std::string>();
}

inline bool get_bool(const json& obj, const std::string& key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_boolean()) schema_error(where + key, "expected boolean");
    return v.get<bool>();
}

} // namespace detail

// ---------------------------------------------------------------------------
// .attn files

inline std::string encode_attn(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
                               std::span<const float> data) {
    if (data.size() != std::size_t(height) * width * channels)
        throw Error(ErrorKind::ShapeMismatch, "payload does not match declared dims");
    std::string buf;
    buf.reserve(kAttnHeaderBytes + 4 * data.size());
    buf.append(kAttnMagic.data(), kAttnMagic.size());
    buf.push_back(static_cast<char>(kAttnVersion));
    buf.append(3, '\0');
    detail::put_u32_le(buf, height);
    detail::put_u32_le(buf, width);
    detail::put_u32_le(buf, channels);
    for (float f : data)
        detail::put_u32_le(buf, std::bit_cast<std::uint32_t>(f));
    return buf;
}

inline AttnArray decode_attn(std::string_view bytes, const std::string& name = "<buffer>") {
    if (bytes.size() < kAttnHeaderBytes)
        throw Error(ErrorKind::ShapeMismatch, name + ": file shorter than the 24-byte header");
    if (!std::equal(kAttnMagic.begin(), kAttnMagic.end(), bytes.begin()))
        throw Error(ErrorKind::SchemaViolation, name + ": bad magic");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (p[8] != kAttnVersion)
        throw Error(ErrorKind::SchemaViolation, name + ": unsupported .attn version " + std::to_string(p[8]));
    if (p[9] != 0 || p[10] != 0 || p[11] != 0)
        throw Error(ErrorKind::SchemaViolation, name + ": reserved header bytes must be zero");
    AttnArray out;
    out.height = detail::get_u32_le(p + 12);
    out.width = detail::get_u32_le(p + 16);
    out.channels = detail::get_u32_le(p + 20);
    const std::uint64_t count = std::uint64_t(out.height) * out.width * out.channels;
    if (bytes.size() - kAttnHeaderBytes != 4 * count)
        throw Error(ErrorKind::ShapeMismatch, name + ": payload is " + std::to_string(bytes.size() - kAttnHeaderBytes) +
                                                  " bytes, dims require " + std::to_string(4 * count));
    out.data.resize(count);
    for (std::uint64_t i = 0; i < count; ++i)
        out.data[i] = std::bit_cast<float>(detail::get_u32_le(p + kAttnHeaderBytes + 4 * i));
    return out;
}

inline void write_attn_file(const fs::path& path, std::uint32_t height, std::uint32_t width, std::uint32_t channels,
                            std::span<const float> data) {
    detail::write_file_bytes(path, encode_attn(height, width, channels, data));
}

inline AttnArray read_attn_file(const fs::path& path) {
    return decode_attn(detail::read_file_bytes(path, ErrorKind::IoFailure), path.string());
}

// ---------------------------------------------------------------------------
// Manifest

/// Checks the cross-field invariants of a parsed manifest.
inline void check_manifest(const DumpManifest& m) {
    using detail::schema_error;
    auto violation = [](const std::string& what) { throw Error(ErrorKind::InvariantViolation, what); };

    if (m.version != kManifestVersion) schema_error("version", "unsupported format version " + std::to_string(m.version));
    if (!m.heads_averaged) violation("heads_averaged must be true for version 1 dumps");
    if (m.context_length == 0) violation("context_length must be positive");
    if (m.latent_height == 0 || m.latent_width == 0 || m.image_height == 0 || m.image_width == 0)
        violation("image and latent dims must be positive");
    if (m.image_height % m.latent_height != 0 || m.image_width % m.latent_width != 0 ||
        m.image_height / m.latent_height != m.image_width / m.latent_width)
        violation("image dims must be the same integer multiple of latent dims on both axes");

    std::set<std::string> ids;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const auto& l = m.layers[i];
        const std::string where = "layers[" + std::to_string(i) + "] (" + l.layer_id + ")";
        if (!detail::valid_layer_id(l.layer_id)) schema_error(where + ".layer_id", "must match [A-Za-z0-9_.-]+");
        if (!ids.insert(l.layer_id).second) violation(where + ": duplicate layer_id");
        if (l.scale_factor == 0 || l.slice_height == 0 || l.slice_width == 0)
            violation(where + ": scale factor and slice dims must be positive");
        const auto s = std::uint64_t(l.scale_factor);
        if (l.slice_height * s < m.latent_height || (l.slice_height - 1) * s >= m.latent_height)
            violation(where + ": slice_height " + std::to_string(l.slice_height) + " is not ceil(latent_height / " +
                      std::to_string(l.scale_factor) + ")");
        if (l.slice_width * s < m.latent_width || (l.slice_width - 1) * s >= m.latent_width)
            violation(where + ": slice_width " + std::to_string(l.slice_width) + " is not ceil(latent_width / " +
                      std::to_string(l.scale_factor) + ")");
    }

    if (m.timesteps.size() > 1) {
        const bool ascending = m.timesteps[0] < m.timesteps[1];
        for (std::size_t i = 1; i < m.timesteps.size(); ++i) {
            const bool ok = ascending ? m.timesteps[i - 1] < m.timesteps[i] : m.timesteps[i - 1] > m.timesteps[i];
            if (!ok) violation("timesteps must be strictly ordered without duplicates");
        }
    }

    std::optional<std::uint32_t> last_token, last_word;
    for (std::size_t i = 0; i < m.tokens.size(); ++i) {
        const auto& t = m.tokens[i];
        const std::string where = "tokens[" + std::to_string(i) + "]";
        if (t.token_index >= m.context_length) violation(where + ": token_index outside context_length");
        if (last_token && t.token_index <= *last_token) violation(where + ": token_index must be strictly increasing");
        last_token = t.token_index;
        if (!t.is_special && !t.word_index) violation(where + ": non-special token without word_index");
        if (t.word_index) {
            if (last_word && *t.word_index < *last_word) violation(where + ": word_index must be non-decreasing");
            last_word = t.word_index;
        }
    }
}

inline DumpManifest manifest_from_json(const nlohmann::json& j) {
    using namespace detail;
    if (!j.is_object()) schema_error("<root>", "expected object");
    if (get_string(j, "format", "") != kManifestFormat) schema_error("format", "expected \"daam-dump\"");
    const auto& ver = require(j, "version", "");
    if (!ver.is_number_integer()) schema_error("version", "expected integer");

    DumpManifest m;
    m.version = ver.get<int>();
    if (m.version != kManifestVersion) schema_error("version", "unsupported format version " + std::to_string(m.version));
    m.prompt = get_string(j, "prompt", "");
    if (auto it = j.find("image_id"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) schema_error("image_id", "expected string");
        m.image_id = it->get<std::string>();
    }
    m.context_length = get_positive(j, "context_length", "");
    m.image_height = get_positive(j, "image_height", "");
    m.image_width = get_positive(j, "image_width", "");
    m.latent_height = get_positive(j, "latent_height", "");
    m.latent_width = get_positive(j, "latent_width", "");
    m.heads_averaged = get_bool(j, "heads_averaged", "");
    if (auto it = j.find("conditional_pass_only"); it != j.end() && !it->is_null()) {
        if (!it->is_boolean()) schema_error("conditional_pass_only", "expected boolean");
        m.conditional_pass_only = it->get<bool>();
    }

    const auto& ts = require(j, "timesteps", "");
    if (!ts.is_array()) schema_error("timesteps", "expected array");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!ts[i].is_number_integer()) schema_error("timesteps[" + std::to_string(i) + "]", "expected integer");
        m.timesteps.push_back(ts[i].get<std::int64_t>());
    }

    const auto& layers = require(j, "layers", "");
    if (!layers.is_array()) schema_error("layers", "expected array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string where = "layers[" + std::to_string(i) + "].";
        const auto& l = layers[i];
        if (!l.is_object()) schema_error(where, "expected object");
        LayerDescriptor d;
        d.layer_id = get_string(l, "layer_id", where);
        auto dir = parse_direction(get_string(l, "direction", where));
        if (!dir) schema_error(where + "direction", "expected one of down, up, mid");
        d.direction = *dir;
        d.scale_factor = get_positive(l, "scale_factor", where);
        d.slice_height = get_positive(l, "slice_height", where);
        d.slice_width = get_positive(l, "slice_width", where);
        m.layers.push_back(std::move(d));
    }

    const auto& tokens = require(j, "tokens", "");
    if (!tokens.is_array()) schema_error("tokens", "expected array");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string where = "tokens[" + std::to_string(i) + "].";
        const auto& t = tokens[i];
        if (!t.is_object()) schema_error(where, "expected object");
        TokenRecord r;
        r.text = get_string(t, "text", where);
        r.token_index = get_index(require(t, "token_index", where), where + "token_index");
        if (auto it = t.find("word_index"); it != t.end() && !it->is_null())
            r.word_index = get_index(*it, where + "word_index");
        if (auto it = t.find("pos_tag"); it != t.end() && !it->is_null()) {
            if (!it->is_string()) schema_error(where + "pos_tag", "expected string");
            r.pos_tag = it->get<std::string>();
        }
        r.is_special = get_bool(t, "is_special", where);
        m.tokens.push_back(std::move(r));
    }

    check_manifest(m);
    return m;
}

inline nlohmann::ordered_json manifest_to_json(const DumpManifest& m) {
    nlohmann::ordered_json j;
    j["format"] = kManifestFormat;
    j["version"] = m.version;
    j["prompt"] = m.prompt;
    if (m.image_id) j["image_id"] = *m.image_id;
    j["context_length"] = m.context_length;
    j["image_height"] = m.image_height;
    j["image_width"] = m.image_width;
    j["latent_height"] = m.latent_height;
    j["latent_width"] = m.latent_width;
    j["heads_averaged"] = m.heads_averaged;
    if (m.conditional_pass_only) j["conditional_pass_only"] = *m.conditional_pass_only;
    j["timesteps"] = m.timesteps;
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto& l : m.layers) {
        nlohmann::ordered_json o;
        o["layer_id"] = l.layer_id;
        o["direction"] = to_string(l.direction);
        o["scale_factor"] = l.scale_factor;
        o["slice_height"] = l.slice_height;
        o["slice_width"] = l.slice_width;
        j["layers"].push_back(std::move(o));
    }
    j["tokens"] = nlohmann::ordered_json::array();
    for (const auto& t : m.tokens) {
        nlohmann::ordered_json o;
        o["text"] = t.text;
        o["token_index"] = t.token_index;
        o["word_index"] = t.word_index ? nlohmann::ordered_json(*t.word_index) : nlohmann::ordered_json(nullptr);
        o["pos_tag"] = t.pos_tag ? nlohmann::ordered_json(*t.pos_tag) : nlohmann::ordered_json(nullptr);
        o["is_special"] = t.is_special;
        j["tokens"].push_back(std::move(o));
    }
    return j;
}

/// Reads and validates `<dir>/manifest.json`.
inline DumpManifest read_manifest(const fs::path& dir) {
    const fs::path file = dir / kManifestFile;
    if (!fs::is_regular_file(file)) throw Error(ErrorKind::MissingManifest, "no manifest.json in " + dir.string());
    const auto text = detail::read_file_bytes(file, ErrorKind::MissingManifest);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::SchemaViolation, "manifest.json: " + std::string(e.what()));
    }
    return manifest_from_json(j);
}

/// Writes `<dir>/manifest.json` with a stable key order; creates dir if needed.
inline void write_manifest(const DumpManifest& m, const fs::path& dir) {
    check_manifest(m);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
    detail::write_file_bytes(dir / kManifestFile, manifest_to_json(m).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Slices

inline std::string slice_file_name(std::string_view layer_id, std::int64_t timestep) {
    return std::string(layer_id) + "_" + std::to_string(timestep) + ".attn";
}

/// Range and row-sum checks; throws the matching error kind.
inline void validate_slice(const AttentionSlice& s, double tolerance = kRowSumTolerance) {
    const std::string name = s.layer_id + "@" + std::to_string(s.timestep);
    for (std::size_t cell = 0; cell < std::size_t(s.height) * s.width; ++cell) {
        double sum = 0.0;
        for (std::size_t k = 0; k < s.tokens; ++k) {
            const float v = s.data[cell * s.tokens + k];
            if (!(v >= 0.0f && v <= 1.0f))
                throw Error(ErrorKind::ValueRangeViolation,
                            name + ": value " + std::to_string(v) + " outside [0,1] at cell " + std::to_string(cell) +
                                ", token " + std::to_string(k));
            sum += v;
        }
        if (std::abs(sum - 1.0) > tolerance)
            throw Error(ErrorKind::RowSumViolation,
                        name + ": token sum " + std::to_string(sum) + " at cell " + std::to_string(cell));
    }
}

/// A manifest bound to the directory it was read from.
struct Dump {
    fs::path root;
    DumpManifest manifest;

    std::string image_id() const {
        return manifest.image_id ? *manifest.image_id : root.filename().string();
    }
};

inline Dump open_dump(const fs::path& dir) {
    return Dump{dir, read_manifest(dir)};
}

inline AttentionSlice read_slice(const Dump& dump, std::string_view layer_id, std::int64_t timestep,
                                 const ReadOptions& opts = {}) {
    const auto* layer = dump.manifest.find_layer(layer_id);
    if (!layer || !dump.manifest.has_timestep(timestep))
        throw Error(ErrorKind::MissingSlice, std::string(layer_id) + "@" + std::to_string(timestep) + " not in manifest");
    const fs::path file = dump.root / slice_file_name(layer_id, timestep);
    if (!fs::is_regular_file(file)) throw Error(ErrorKind::MissingSlice, "missing " + file.string());

    auto raw = decode_attn(detail::read_file_bytes(file, ErrorKind::MissingSlice), file.string());
    if (raw.height != layer->slice_height || raw.width != layer->slice_width ||
        raw.channels != dump.manifest.context_length)
        throw Error(ErrorKind::ShapeMismatch, file.string() + ": dims " + std::to_string(raw.height) + "x" +
                                                  std::to_string(raw.width) + "x" + std::to_string(raw.channels) +
                                                  " differ from manifest");
    AttentionSlice s{std::string(layer_id), timestep, raw.height, raw.width, raw.channels, std::move(raw.data)};
    if (opts.validate) validate_slice(s, opts.row_sum_tolerance);
    return s;
}

/// Writes `<dir>/<layer_id>_<timestep>.attn`.
inline void write_slice(const AttentionSlice& s, const fs::path& dir) {
    for (float v : s.data)
        if (!std::isfinite(v)) throw Error(ErrorKind::ValueRangeViolation, "non-finite value in " + s.layer_id);
    if (!detail::valid_layer_id(s.layer_id)) throw Error(ErrorKind::SchemaViolation, "layer_id: bad characters");
    write_attn_file(dir / slice_file_name(s.layer_id, s.timestep), s.height, s.width, s.tokens, s.data);
}

struct SliceKey {
    std::size_t layer;  // index into manifest.layers
    std::int64_t timestep;
};

/// Layers in manifest order, timesteps ascending within each layer.
inline std::vector<SliceKey> canonical_order(const DumpManifest& m) {
    std::vector<SliceKey> keys;
    const auto ts = m.timesteps_ascending();
    keys.reserve(m.layers.size() * ts.size());
    for (std::size_t l = 0; l < m.layers.size(); ++l)
        for (auto t : ts)
            keys.push_back({l, t});
    return keys;
}

struct SliceItem {
    const LayerDescriptor* layer = nullptr;
    std::int64_t timestep = 0;
    AttentionSlice slice;
};

/// Lazy single-pass range over a dump's slices in canonical order. Each
/// slice is loaded when the iterator reaches it, so a missing or invalid file
/// raises at that item.
class SliceStream {
public:
    explicit SliceStream(const Dump& dump, ReadOptions opts = {})
        : dump_(&dump), opts_(opts), keys_(canonical_order(dump.manifest)) {}
    SliceStream(const Dump& dump, ReadOptions opts, std::vector<SliceKey> keys)
        : dump_(&dump), opts_(opts), keys_(std::move(keys)) {}

    class iterator {
    public:
        using iterator_category = std::input_iterator_tag;
        using value_type = SliceItem;
        using difference_type = std::ptrdiff_t;
        using pointer = const SliceItem*;
        using reference = const SliceItem&;

        iterator() = default;
        iterator(const SliceStream* owner, std::size_t pos) : owner_(owner), pos_(pos) { load(); }

        reference operator*() const { return item_; }
        pointer operator->() const { return &item_; }
        iterator& operator++() {
            ++pos_;
            load();
            return *this;
        }
        void operator++(int) { ++*this; }
        bool operator==(const iterator& o) const { return pos_ == o.pos_; }

    private:
        void load() {
            if (!owner_ || pos_ >= owner_->keys_.size()) return;
            const auto& key = owner_->keys_[pos_];
            const auto& layer = owner_->dump_->manifest.layers[key.layer];
            item_.layer = &layer;
            item_.timestep = key.timestep;
            item_.slice = read_slice(*owner_->dump_, layer.layer_id, key.timestep, owner_->opts_);
        }

        const SliceStream* owner_ = nullptr;
        std::size_t pos_ = 0;
        SliceItem item_;
    };

    iterator begin() const { return iterator(this, 0); }
    iterator end() const { return iterator(nullptr, keys_.size()); }
    std::size_t size() const noexcept { return keys_.size(); }

private:
    const Dump* dump_;
    ReadOptions opts_;
    std::vector<SliceKey> keys_;
};

inline SliceStream iterate_slices(const Dump& dump, ReadOptions opts = {}) {
    return SliceStream(dump, opts);
}

} // namespace daam
