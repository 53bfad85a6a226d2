#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "daam/attribution.hpp"
#include "daam/csv.hpp"
#include "daam/tensor_store.hpp"

namespace daam {

inline constexpr double kDefaultPosTau = 0.4;

struct IntensityRecord {
    std::string word;
    std::string pos_tag;
    double intensity = 0.0;
    std::string image_id;
    std::uint32_t word_index = 0;
};

struct GroupStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct PosSummary {
    std::map<std::string, GroupStats> groups;  // keyed by POS tag
};

/// Fraction of pixels set in the mask.
inline double map_intensity(const HardMask& mask) {
    if (mask.data.empty()) return 0.0;
    return double(count_true(mask.data)) / double(mask.data.size());
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (position p * (n - 1)).
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double pos = p * double(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - double(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline GroupStats describe(std::vector<double> values) {
    GroupStats g;
    if (values.empty()) return g;
    std::sort(values.begin(), values.end());
    // Neumaier summation over the sorted values.
    double sum = 0.0, comp = 0.0;
    for (double v : values) {
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    g.count = values.size();
    g.mean = (sum + comp) / double(values.size());
    g.median = quantile_sorted(values, 0.5);
    g.q1 = quantile_sorted(values, 0.25);
    g.q3 = quantile_sorted(values, 0.75);
    g.min = values.front();
    g.max = values.back();
    return g;
}

/// Groups records by POS tag. Records without a tag are ignored.
inline PosSummary summarize(std::span<const IntensityRecord> records) {
    std::map<std::string, std::vector<double>> by_tag;
    for (const auto& r : records)
        if (!r.pos_tag.empty()) by_tag[r.pos_tag].push_back(r.intensity);
    PosSummary out;
    for (auto& [tag, values] : by_tag) out.groups[tag] = describe(std::move(values));
    return out;
}

/// One record per POS-tagged word of the dump: the merged word map,
/// thresholded at tau, reduced to its pixel coverage.
inline std::vector<IntensityRecord> collect_intensities(const Dump& dump, double tau,
                                                        const AggregateOptions& opts = {}) {
    const auto& m = dump.manifest;
    std::vector<std::uint32_t> words;
    for (auto w : m.word_indices())
        if (m.word_pos(w)) words.push_back(w);
    std::vector<IntensityRecord> out;
    if (words.empty()) return out;
    const auto maps = word_heat_maps(dump, words, opts);
    for (std::size_t i = 0; i < words.size(); ++i)
        out.push_back({m.word_text(words[i]), *m.word_pos(words[i]), map_intensity(threshold(maps[i], tau)),
                       dump.image_id(), words[i]});
    return out;
}

inline nlohmann::ordered_json to_json(const PosSummary& s) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [tag, g] : s.groups) {
        j[tag] = {{"count", g.count}, {"mean", g.mean}, {"median", g.median}, {"q1", g.q1},
                  {"q3", g.q3},       {"min", g.min},   {"max", g.max}};
    }
    return j;
}

inline void write_csv(std::ostream& os, std::span<const IntensityRecord> records) {
    os << "image_id,word_index,word,pos_tag,intensity\n";
    os.precision(17);
    for (const auto& r : records)
        os << csv_field(r.image_id) << ',' << r.word_index << ',' << csv_field(r.word) << ',' << csv_field(r.pos_tag)
           << ',' << r.intensity << '\n';
}

} // namespace daam
