#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "daam/attribution.hpp"
#include "daam/csv.hpp"
#include "daam/error.hpp"
#include "daam/grid.hpp"
#include "daam/png_io.hpp"
#include "daam/rng.hpp"
#include "daam/tensor_store.hpp"

namespace daam {

struct GroundTruthSegment {
    std::string noun;
    std::optional<std::string> class_label;
    Mask mask;
    std::string image_id;
};

/// |pred & gt| / |pred | gt|. Two empty masks score 1.
inline double iou(const Mask& pred, const Mask& gt) {
    if (!pred.same_shape(gt))
        throw Error(ErrorKind::DimMismatch, std::to_string(pred.height()) + "x" + std::to_string(pred.width()) + " vs " +
                                                std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
    std::size_t inter = 0, uni = 0;
    auto a = pred.values();
    auto b = gt.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool p = a[i] != 0, g = b[i] != 0;
        inter += p && g;
        uni += p || g;
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

// ---------------------------------------------------------------------------
// Class restriction

/// Lower-cases, trims, folds '_' and runs of whitespace into single spaces.
inline std::string normalize_class_name(std::string_view raw) {
    std::string out;
    bool pending_space = false;
    for (char ch : raw) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || ch == '_') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

/// Closed class vocabulary (e.g. the 80 COCO categories).
class ClassList {
public:
    ClassList() = default;
    explicit ClassList(const std::vector<std::string>& names) {
        for (const auto& n : names)
            if (auto k = normalize_class_name(n); !k.empty()) names_.insert(k);
    }

    /// One class per line; blank lines and '#' comments ignored.
    static ClassList load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::IoFailure, "cannot open class list " + path.string());
        std::vector<std::string> names;
        for (std::string line; std::getline(in, line);) {
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            names.push_back(line);
        }
        return ClassList(names);
    }

    /// Lower-case lemma match: the label as written, or with a plural
    /// "-s"/"-es" suffix removed, must name a listed class.
    bool contains(std::string_view label) const {
        const auto key = normalize_class_name(label);
        if (key.empty()) return false;
        if (names_.count(key)) return true;
        auto ends_with = [&](std::string_view suf) {
            return key.size() > suf.size() && key.compare(key.size() - suf.size(), suf.size(), suf) == 0;
        };
        if (ends_with("es") && names_.count(key.substr(0, key.size() - 2))) return true;
        if (ends_with("s") && names_.count(key.substr(0, key.size() - 1))) return true;
        return false;
    }

    std::size_t size() const noexcept { return names_.size(); }

private:
    std::set<std::string> names_;
};

struct Restriction {
    enum class Kind { open, closed_list };
    Kind kind = Kind::open;
    ClassList classes;

    static Restriction open() { return {}; }
    static Restriction closed(ClassList list) { return {Kind::closed_list, std::move(list)}; }

    /// Pairs without a class label only count under open vocabulary.
    bool admits(const GroundTruthSegment& gt) const {
        if (kind == Kind::open) return true;
        return gt.class_label && classes.contains(*gt.class_label);
    }
};

struct EvalConfig {
    Restriction restriction;
    std::vector<double> taus;  // empty: every tau present in the pairs
};

struct EvalPair {
    HardMask pred;
    GroundTruthSegment gt;
};

struct PairRecord {
    std::string image_id;
    std::string noun;
    std::optional<std::string> class_label;
    double tau = 0.0;
    double iou = 0.0;
};

struct EvalReport {
    Restriction::Kind restriction = Restriction::Kind::open;
    std::vector<PairRecord> records;  // included pairs only
    std::map<double, double> miou;    // tau -> mean IoU over included pairs
    std::map<double, std::size_t> pair_count;
    std::size_t evaluated = 0;  // included pair evaluations, all taus
    std::size_t excluded = 0;   // dropped by the class restriction
    std::size_t skipped = 0;    // ground truth with no usable prediction, filled by callers
};

namespace detail {
inline bool tau_listed(std::span<const double> taus, double tau) {
    return std::any_of(taus.begin(), taus.end(), [tau](double t) { return std::abs(t - tau) <= 1e-12; });
}
} // namespace detail

/// Pair-mean IoU per tau: the mean is over prediction/ground-truth pairs, not
/// over classes. Under a closed list, pairs whose class label is not listed
/// are dropped before averaging.
inline EvalReport evaluate(std::span<const EvalPair> pairs, const EvalConfig& config) {
    EvalReport report;
    report.restriction = config.restriction.kind;
    std::map<double, std::vector<double>> per_tau;
    for (const auto& p : pairs) {
        if (!config.taus.empty() && !detail::tau_listed(config.taus, p.pred.tau)) continue;
        if (!config.restriction.admits(p.gt)) {
            ++report.excluded;
            continue;
        }
        const double v = iou(p.pred.data, p.gt.mask);
        report.records.push_back({p.gt.image_id, p.gt.noun, p.gt.class_label, p.pred.tau, v});
        per_tau[p.pred.tau].push_back(v);
        ++report.evaluated;
    }
    if (report.evaluated == 0) throw Error(ErrorKind::EmptyEvaluation, "no prediction/ground-truth pair survives");
    // Summing in sorted order makes the mean independent of pair order.
    for (auto& [tau, values] : per_tau) {
        std::sort(values.begin(), values.end());
        double sum = 0.0;
        for (double v : values) sum += v;
        report.pair_count[tau] = values.size();
        report.miou[tau] = sum / double(values.size());
    }
    return report;
}

/// Each pixel set independently with probability 1/2 (top bit of a
/// xoshiro256** stream seeded through SplitMix64), row-major order.
inline Mask random_baseline(std::size_t height, std::size_t width, std::uint64_t seed) {
    Xoshiro256StarStar rng(seed);
    Mask out(height, width, 0);
    for (auto& v : out) v = rng.coin() ? 1 : 0;
    return out;
}

/// Baseline prediction for the i-th ground-truth segment uses seed + i.
inline std::vector<EvalPair> random_baseline_pairs(std::span<const GroundTruthSegment> gts, std::uint64_t seed) {
    std::vector<EvalPair> out;
    out.reserve(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
        const auto& gt = gts[i];
        out.push_back({HardMask{random_baseline(gt.mask.height(), gt.mask.width(), seed + i), 0.5, 1.0}, gt});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ground-truth directories

struct MissingAnnotation {
    std::string image_id;
    std::string noun;
    std::string reason;
};

struct GroundTruthSet {
    std::vector<GroundTruthSegment> segments;
    std::vector<MissingAnnotation> missing;
};

/// Reads `<dir>/annotations.json`: a list of {image_id, noun, class_label?,
/// mask_file?}. Entries without a mask_file record a noun with no generated
/// instance and are returned in `missing`.
inline GroundTruthSet load_ground_truth(const std::filesystem::path& dir) {
    const auto file = dir / "annotations.json";
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::SchemaViolation, "annotations.json: " + std::string(e.what()));
    }
    if (!j.is_array()) throw Error(ErrorKind::SchemaViolation, "annotations.json: expected a list");

    GroundTruthSet set;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& a = j[i];
        const std::string where = "annotations[" + std::to_string(i) + "]";
        if (!a.is_object() || !a.contains("image_id") || !a["image_id"].is_string() || !a.contains("noun") ||
            !a["noun"].is_string())
            throw Error(ErrorKind::SchemaViolation, where + ": image_id and noun strings are required");
        GroundTruthSegment seg;
        seg.image_id = a["image_id"].get<std::string>();
        seg.noun = a["noun"].get<std::string>();
        if (seg.noun.empty()) throw Error(ErrorKind::SchemaViolation, where + ".noun: must be non-empty");
        if (auto it = a.find("class_label"); it != a.end() && !it->is_null()) {
            if (!it->is_string()) throw Error(ErrorKind::SchemaViolation, where + ".class_label: expected string");
            seg.class_label = it->get<std::string>();
        }
        auto mf = a.find("mask_file");
        if (mf == a.end() || mf->is_null()) {
            set.missing.push_back({seg.image_id, seg.noun, "no instance in image"});
            continue;
        }
        if (!mf->is_string()) throw Error(ErrorKind::SchemaViolation, where + ".mask_file: expected string");
        seg.mask = read_png_mask(dir / mf->get<std::string>());
        set.segments.push_back(std::move(seg));
    }
    return set;
}

struct DatasetPairs {
    std::vector<EvalPair> pairs;            // one per (segment, tau)
    std::vector<GroundTruthSegment> matched;  // segments that produced pairs
    std::vector<MissingAnnotation> skipped;
};

/// Matches each ground-truth noun to the first word of the same surface form
/// in the dump with that image_id, and thresholds its map at every tau.
inline DatasetPairs pair_with_dumps(std::span<const Dump> dumps, const GroundTruthSet& gt,
                                    std::span<const double> taus, const AggregateOptions& opts = {}) {
    DatasetPairs out;
    out.skipped = gt.missing;
    std::map<std::string, const Dump*> by_id;
    for (const auto& d : dumps) by_id[d.image_id()] = &d;

    // Group segments by image so each dump is streamed once.
    std::map<std::string, std::vector<const GroundTruthSegment*>> per_image;
    for (const auto& seg : gt.segments) per_image[seg.image_id].push_back(&seg);

    for (const auto& [image_id, segs] : per_image) {
        auto it = by_id.find(image_id);
        if (it == by_id.end()) {
            for (const auto* s : segs) out.skipped.push_back({s->image_id, s->noun, "no dump for image"});
            continue;
        }
        const Dump& dump = *it->second;
        std::vector<std::uint32_t> words;
        std::vector<const GroundTruthSegment*> used;
        for (const auto* s : segs) {
            const auto found = find_words(dump.manifest, s->noun);
            if (found.empty()) {
                out.skipped.push_back({s->image_id, s->noun, "noun not in prompt"});
                continue;
            }
            if (s->mask.height() != dump.manifest.image_height || s->mask.width() != dump.manifest.image_width)
                throw Error(ErrorKind::DimMismatch, "mask for " + s->image_id + "/" + s->noun + " differs from image size");
            words.push_back(found.front());
            used.push_back(s);
        }
        if (words.empty()) continue;
        const auto maps = word_heat_maps(dump, words, opts);
        for (std::size_t i = 0; i < used.size(); ++i) {
            out.matched.push_back(*used[i]);
            for (double tau : taus) out.pairs.push_back({threshold(maps[i], tau), *used[i]});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report serialisation

inline std::string format_tau(double tau) {
    std::ostringstream os;
    os.precision(15);
    os << tau;
    return os.str();
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["restriction"] = r.restriction == Restriction::Kind::open ? "open" : "closed_list";
    nlohmann::ordered_json miou = nlohmann::ordered_json::object();
    for (const auto& [tau, v] : r.miou) miou[format_tau(tau)] = v;
    j["miou"] = miou;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [tau, n] : r.pair_count) counts[format_tau(tau)] = n;
    j["pairs_per_tau"] = counts;
    j["evaluated"] = r.evaluated;
    j["excluded"] = r.excluded;
    j["skipped"] = r.skipped;
    j["records"] = nlohmann::ordered_json::array();
    for (const auto& rec : r.records) {
        nlohmann::ordered_json o;
        o["image_id"] = rec.image_id;
        o["noun"] = rec.noun;
        o["class_label"] = rec.class_label ? nlohmann::ordered_json(*rec.class_label) : nlohmann::ordered_json(nullptr);
        o["tau"] = rec.tau;
        o["iou"] = rec.iou;
        j["records"].push_back(std::move(o));
    }
    return j;
}

inline void write_csv_rows(std::ostream& os, const EvalReport& r, std::string_view method) {
    const char* restriction = r.restriction == Restriction::Kind::open ? "open" : "closed_list";
    for (const auto& rec : r.records) {
        os << csv_field(method) << ',' << restriction << ',' << csv_field(rec.image_id) << ',' << csv_field(rec.noun)
           << ',' << csv_field(rec.class_label ? *rec.class_label : "") << ',' << format_tau(rec.tau) << ','
           << format_tau(rec.iou) << '\n';
    }
}

} // namespace daam
