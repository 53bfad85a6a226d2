// daam: command-line front end for the attribution toolkit.
//
// Exit codes: 0 success, 1 input or validation error, 2 empty result,
// 64 usage error. Option values resolve as flag > DAAM_* environment >
// daam.toml > built-in default.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "daam/daam.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitEmpty = 2;
constexpr int kExitUsage = 64;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string env_key(std::string s) {
    for (auto& ch : s) ch = ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

std::string config_key(std::string s) {
    std::replace(s.begin(), s.end(), '_', '-');
    return s;
}

// Environment and config-file values for options the user did not pass.
class Fallbacks {
public:
    void load(const fs::path& file) {
        std::vector<CLI::ConfigItem> items;
        try {
            items = CLI::ConfigTOML().from_file(file.string());
        } catch (const CLI::Error& e) {
            throw UsageError("cannot read config " + file.string() + ": " + e.what());
        }
        for (const auto& item : items) {
            if (item.name == "++" || item.name == "--") continue;
            std::string key;
            for (const auto& p : item.parents) key += p + ".";
            values_[key + config_key(item.name)] = item.inputs;
        }
    }

    // Fills every option of `sub` that has no command-line value.
    // `general` also consults DAAM_<FLAG> and top-level config keys.
    void apply(CLI::App& sub, bool general) const {
        const std::string name = sub.get_name();
        for (CLI::Option* opt : sub.get_options()) {
            if (opt == sub.get_help_ptr() || opt->count() > 0) continue;
            const std::string flag = opt->get_single_name();
            if (flag.empty()) continue;
            if (const char* v = std::getenv(("DAAM_" + env_key(name) + "_" + env_key(flag)).c_str())) {
                set(opt, std::vector<std::string>{v});
            } else if (const char* g = general ? std::getenv(("DAAM_" + env_key(flag)).c_str()) : nullptr) {
                set(opt, std::vector<std::string>{g});
            } else if (auto it = values_.find(name + "." + config_key(flag)); it != values_.end()) {
                set(opt, it->second);
            } else if (auto top = values_.find(config_key(flag)); general && top != values_.end()) {
                set(opt, top->second);
            }
        }
    }

private:
    static void set(CLI::Option* opt, const std::vector<std::string>& values) {
        for (const auto& v : values) opt->add_result(v);
        opt->run_callback();
    }

    std::map<std::string, std::vector<std::string>> values_;
};

// ---------------------------------------------------------------------------
// Argument conversion

double parse_tau(const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end) throw UsageError("tau is not a number: '" + text + "'");
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError("tau must lie in [0, 1]: " + text);
    return v;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

// "none" or an empty string stands for an empty list.
std::vector<double> parse_taus(const std::vector<std::string>& raw) {
    std::vector<double> out;
    for (const auto& r : raw) {
        const auto t = trim(r);
        if (t.empty() || t == "none") continue;
        out.push_back(parse_tau(t));
    }
    return out;
}

struct MapOptions {
    std::string upsample = "deconv";
    std::string layers = "all";
    bool no_validate = false;

    void add_to(CLI::App& sub) {
        sub.add_option("--upsample", upsample, "deconv or bicubic")->capture_default_str();
        sub.add_option("--layers", layers, "all, or a comma list of down,up,mid")->capture_default_str();
        sub.add_flag("--no-validate", no_validate, "skip value-range and row-sum checks on slices");
    }

    daam::AggregateOptions resolve() const {
        daam::AggregateOptions o;
        if (upsample == "deconv") o.mode = daam::UpscaleMode::sum_preserving_deconv;
        else if (upsample == "bicubic") o.mode = daam::UpscaleMode::bicubic;
        else throw UsageError("--upsample must be deconv or bicubic, got '" + upsample + "'");
        const auto f = daam::parse_layer_filter(layers);
        if (!f) throw UsageError("--layers must be all or a comma list of down,up,mid, got '" + layers + "'");
        o.layers = *f;
        o.read.validate = !no_validate;
        return o;
    }
};

// A directory with manifest.json is a dump; otherwise each child that has
// one is.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
    if (inputs.empty()) throw UsageError("--input is required");
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::exists(p / daam::kManifestFile) || !fs::is_directory(p)) {
            out.push_back(p);
            continue;
        }
        std::vector<fs::path> children;
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_directory() && fs::exists(e.path() / daam::kManifestFile)) children.push_back(e.path());
        if (children.empty()) out.push_back(p);  // let open_dump report it
        std::sort(children.begin(), children.end());
        out.insert(out.end(), children.begin(), children.end());
    }
    return out;
}

std::vector<daam::Dump> open_dumps(const std::vector<std::string>& inputs) {
    std::vector<daam::Dump> dumps;
    for (const auto& p : expand_inputs(inputs)) dumps.push_back(daam::open_dump(p));
    return dumps;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw daam::Error(daam::ErrorKind::IoFailure, "cannot write " + path.string());
    out << text;
}

// JSON goes to stdout for "-".
void emit_json(const std::string& out, const ojson& j) {
    if (out == "-") std::cout << j.dump(2) << "\n";
    else write_text(out, j.dump(2) + "\n");
}

std::string file_stem(const std::string& text) {
    std::string s;
    for (unsigned char ch : text) s += std::isalnum(ch) || ch == '-' || ch == '_' ? char(ch) : '_';
    return s.empty() ? "_" : s;
}

// ---------------------------------------------------------------------------
// compute

struct Subject {
    daam::SubjectKind kind;
    std::uint32_t index;
    std::string text;
    std::string stem;
    std::vector<std::uint32_t> tokens;
};

struct ComputeArgs {
    std::string input;
    std::vector<std::string> words;
    std::vector<std::uint32_t> token_indices;
    std::vector<std::string> taus{"0.3", "0.4", "0.5"};
    std::string out = "daam-out";
    MapOptions map;
};

std::vector<Subject> select_subjects(const daam::DumpManifest& m, const ComputeArgs& a) {
    std::vector<Subject> out;
    std::vector<std::uint32_t> words;
    for (const auto& w : a.words) {
        const auto found = daam::find_words(m, w);
        if (found.empty()) throw daam::Error(daam::ErrorKind::UnknownWord, "'" + w + "' is not a word of the prompt");
        words.insert(words.end(), found.begin(), found.end());
    }
    if (a.words.empty() && a.token_indices.empty()) words = m.word_indices();
    std::set<std::uint32_t> seen;
    for (auto w : words)
        if (seen.insert(w).second)
            out.push_back({daam::SubjectKind::word, w, m.word_text(w), file_stem(m.word_text(w)), m.tokens_of_word(w)});

    std::map<std::string, int> stems;
    for (const auto& s : out) ++stems[s.stem];
    for (auto& s : out)
        if (stems[s.stem] > 1) s.stem += ".w" + std::to_string(s.index);

    for (auto k : a.token_indices) {
        if (k >= m.context_length)
            throw daam::Error(daam::ErrorKind::OutOfRange, "token index " + std::to_string(k) + " >= context length " +
                                                               std::to_string(m.context_length));
        const auto it = std::find_if(m.tokens.begin(), m.tokens.end(), [k](const auto& t) { return t.token_index == k; });
        const std::string text = it == m.tokens.end() ? "" : it->text;
        out.push_back({daam::SubjectKind::token, k, text, "token" + std::to_string(k), {k}});
    }
    return out;
}

int cmd_compute(const ComputeArgs& a) {
    if (a.input.empty()) throw UsageError("--input is required");
    const auto taus = parse_taus(a.taus);
    const auto opts = a.map.resolve();
    const auto dump = daam::open_dump(a.input);
    const auto& m = dump.manifest;
    const auto subjects = select_subjects(m, a);

    std::vector<std::uint32_t> tokens;
    for (const auto& s : subjects) tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    const auto token_maps = daam::token_heat_maps(dump, tokens, opts);
    auto token_map = [&](std::uint32_t k) -> const daam::HeatMap& {
        return token_maps[std::lower_bound(tokens.begin(), tokens.end(), k) - tokens.begin()];
    };

    const fs::path out(a.out);
    fs::create_directories(out);
    ojson index;
    index["input"] = fs::path(a.input).lexically_normal().string();
    index["image_id"] = dump.image_id();
    index["image_height"] = m.image_height;
    index["image_width"] = m.image_width;
    index["upsample"] = a.map.upsample;
    index["layers"] = a.map.layers;
    index["taus"] = taus;
    index["maps"] = ojson::array();

    for (const auto& s : subjects) {
        daam::HeatMap map;
        if (s.kind == daam::SubjectKind::token) {
            map = token_map(s.index);
        } else {
            std::vector<daam::HeatMap> parts;
            for (auto k : s.tokens) parts.push_back(token_map(k));
            map = daam::merge_token_maps(parts, s.index);
        }
        ojson entry;
        entry["kind"] = s.kind == daam::SubjectKind::word ? "word" : "token";
        entry["index"] = s.index;
        entry["text"] = s.text;
        entry["tokens"] = s.tokens;
        entry["max"] = map.max();
        entry["heat_attn"] = s.stem + ".heat.attn";
        entry["heat_png"] = s.stem + ".heat.png";
        daam::write_heat_map_attn(map, out / (s.stem + ".heat.attn"));
        daam::write_heat_map_png(map, out / (s.stem + ".heat.png"));
        ojson masks = ojson::object();
        for (double tau : taus) {
            const auto mask = daam::threshold(map, tau);
            const std::string file = s.stem + ".tau" + daam::format_tau(tau) + ".png";
            daam::write_mask_png(mask.data, out / file);
            masks[daam::format_tau(tau)] = {{"file", file}, {"pixels", daam::count_true(mask.data)}};
        }
        entry["masks"] = masks;
        std::cout << std::left << std::setw(16) << s.stem << " max " << map.max() << "\n";
        index["maps"].push_back(std::move(entry));
    }
    write_text(out / "index.json", index.dump(2) + "\n");
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::vector<std::string> inputs;
    std::string gt;
    std::string classes;
    std::vector<std::string> taus{"0.3", "0.4", "0.5"};
    std::string baseline;
    std::uint64_t seed = 0;
    std::string out = "-";
    std::string csv;
    MapOptions map;
};

int cmd_eval(const EvalArgs& a) {
    if (a.gt.empty()) throw UsageError("--gt is required");
    if (!a.baseline.empty() && a.baseline != "random") throw UsageError("--baseline must be 'random'");
    const auto taus = parse_taus(a.taus);
    if (taus.empty()) throw UsageError("eval needs at least one tau");
    const auto opts = a.map.resolve();
    const auto dumps = open_dumps(a.inputs);
    const auto gt = daam::load_ground_truth(a.gt);
    const auto paired = daam::pair_with_dumps(dumps, gt, taus, opts);

    std::vector<daam::Restriction> restrictions{daam::Restriction::open()};
    if (!a.classes.empty()) restrictions.push_back(daam::Restriction::closed(daam::ClassList::load(a.classes)));

    struct Run {
        std::string method;
        daam::EvalReport report;
    };
    std::vector<Run> runs;
    for (const auto& r : restrictions) {
        auto rep = daam::evaluate(paired.pairs, {r, taus});
        rep.skipped = paired.skipped.size();
        runs.push_back({"daam", std::move(rep)});
    }
    if (a.baseline == "random") {
        const auto pairs = daam::random_baseline_pairs(paired.matched, a.seed);
        for (const auto& r : restrictions) {
            auto rep = daam::evaluate(pairs, {r, {}});
            rep.skipped = paired.skipped.size();
            runs.push_back({"random", std::move(rep)});
        }
    }

    ojson j;
    j["taus"] = taus;
    if (a.baseline == "random") j["seed"] = a.seed;
    j["reports"] = ojson::array();
    for (const auto& run : runs) {
        ojson r;
        r["method"] = run.method;
        const auto body = daam::to_json(run.report);
        for (const auto& [k, val] : body.items()) r[k] = val;
        j["reports"].push_back(std::move(r));
    }
    j["skipped"] = ojson::array();
    for (const auto& s : paired.skipped)
        j["skipped"].push_back({{"image_id", s.image_id}, {"noun", s.noun}, {"reason", s.reason}});
    emit_json(a.out, j);

    if (!a.csv.empty()) {
        std::ostringstream os;
        os << "method,restriction,image_id,noun,class_label,tau,iou\n";
        for (const auto& run : runs) daam::write_csv_rows(os, run.report, run.method);
        write_text(a.csv, os.str());
    }
    if (a.out != "-") {
        std::cout << "method  restriction  tau    mIoU      pairs\n";
        for (const auto& run : runs)
            for (const auto& [tau, v] : run.report.miou)
                std::cout << std::left << std::setw(8) << run.method << std::setw(13)
                          << (run.report.restriction == daam::Restriction::Kind::open ? "open" : "closed_list")
                          << std::setw(7) << daam::format_tau(tau) << std::fixed << std::setprecision(4)
                          << std::setw(10) << v << std::defaultfloat << run.report.pair_count.at(tau) << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// pos

struct PosArgs {
    std::vector<std::string> inputs;
    double tau = daam::kDefaultPosTau;
    std::string out = "-";
    std::string csv;
    MapOptions map;
};

int cmd_pos(const PosArgs& a) {
    if (!(a.tau >= 0.0 && a.tau <= 1.0)) throw UsageError("tau must lie in [0, 1]");
    const auto opts = a.map.resolve();
    std::vector<daam::IntensityRecord> records;
    for (const auto& d : open_dumps(a.inputs)) {
        auto r = daam::collect_intensities(d, a.tau, opts);
        records.insert(records.end(), r.begin(), r.end());
    }
    if (records.empty()) std::cerr << "daam: warning: no POS-tagged words in the input\n";
    const auto summary = daam::summarize(records);

    ojson j;
    j["tau"] = a.tau;
    j["groups"] = daam::to_json(summary);
    j["records"] = ojson::array();
    for (const auto& r : records)
        j["records"].push_back({{"image_id", r.image_id}, {"word_index", r.word_index}, {"word", r.word},
                                {"pos_tag", r.pos_tag}, {"intensity", r.intensity}});
    emit_json(a.out, j);
    if (!a.csv.empty()) {
        std::ostringstream os;
        daam::write_csv(os, records);
        write_text(a.csv, os.str());
    }
    if (a.out != "-") {
        std::cout << "pos      count  mean     median\n";
        for (const auto& [tag, g] : summary.groups)
            std::cout << std::left << std::setw(9) << tag << std::setw(7) << g.count << std::fixed
                      << std::setprecision(4) << std::setw(9) << g.mean << g.median << std::defaultfloat << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// fixture

struct FixtureArgs {
    std::string out;
    std::string kind = "random";
    long layers = 3;
    long steps = 5;
    std::uint64_t seed = 1;
    long context_length = 16;
    long latent = 16;
    long image_scale = 4;
};

int cmd_fixture(const FixtureArgs& a) {
    if (a.out.empty()) throw UsageError("--out is required");
    daam::FixtureSpec spec;
    if (a.kind == "random") spec.kind = daam::FixtureKind::random;
    else if (a.kind == "hot-square") spec.kind = daam::FixtureKind::hot_square;
    else throw UsageError("--kind must be random or hot-square");
    auto positive = [](long v, const char* flag) {
        if (v < 1 || v > 1 << 20) throw UsageError(std::string(flag) + " must be a positive integer");
        return static_cast<std::uint32_t>(v);
    };
    spec.layers = positive(a.layers, "--layers");
    spec.steps = positive(a.steps, "--steps");
    spec.context_length = positive(a.context_length, "--context-length");
    spec.latent_size = positive(a.latent, "--latent");
    spec.pixels_per_latent = positive(a.image_scale, "--image-scale");
    spec.seed = a.seed;
    daam::Fixture fx;
    try {
        fx = daam::make_fixture(spec);
    } catch (const daam::Error& e) {
        if (e.kind() == daam::ErrorKind::OutOfRange) throw UsageError(e.what());
        throw;
    }
    fs::create_directories(a.out);
    daam::write_fixture(fx, a.out);
    std::cout << a.out << ": " << fx.slices.size() << " slices (" << fx.manifest.layers.size() << " layers x "
              << fx.manifest.timesteps.size() << " steps)\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// render

struct RenderArgs {
    std::string input;
    std::string word;
    std::optional<std::uint32_t> token_index;
    std::string mode = "soft";
    double alpha = 0.6;
    std::string colormap = std::string(DAAM_DATA_DIR) + "/colormaps/turbo5.json";
    std::string image;
    double tau = 0.4;
    std::string out;
    MapOptions map;
};

int cmd_render(const RenderArgs& a) {
    if (a.input.empty()) throw UsageError("--input is required");
    if (a.word.empty() == !a.token_index) throw UsageError("give exactly one of --word or --token-index");
    daam::OverlaySpec spec;
    const auto mode = daam::parse_draw_mode(a.mode);
    if (!mode) throw UsageError("--mode must be soft, hard_fill or hard_outline");
    spec.draw_mode = *mode;
    spec.alpha = a.alpha;
    if (!(a.alpha >= 0.0 && a.alpha <= 1.0)) throw UsageError("--alpha must lie in [0, 1]");
    if (!(a.tau >= 0.0 && a.tau <= 1.0)) throw UsageError("--tau must lie in [0, 1]");
    const auto opts = a.map.resolve();
    spec.colormap = daam::Colormap::load(a.colormap);

    const auto dump = daam::open_dump(a.input);
    daam::HeatMap map;
    std::string stem;
    if (a.token_index) {
        if (*a.token_index >= dump.manifest.context_length)
            throw daam::Error(daam::ErrorKind::OutOfRange, "token index beyond context length");
        map = daam::token_heat_map(dump, *a.token_index, opts);
        stem = "token" + std::to_string(*a.token_index);
    } else {
        const auto found = daam::find_words(dump.manifest, a.word);
        if (found.empty()) throw daam::Error(daam::ErrorKind::UnknownWord, "'" + a.word + "' is not a word of the prompt");
        map = daam::word_heat_map(dump, found.front(), opts);
        stem = file_stem(dump.manifest.word_text(found.front()));
    }
    const auto image = daam::read_png_rgb(a.image.empty() ? fs::path(a.input) / "image.png" : fs::path(a.image));
    const auto rendered = spec.draw_mode == daam::DrawMode::soft ? daam::render_soft(image, map, spec)
                                                                 : daam::render_hard(image, daam::threshold(map, a.tau), spec);
    const fs::path out = a.out.empty() ? fs::path(stem + "." + a.mode + ".png") : fs::path(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    daam::write_png_rgb(out, rendered);
    std::cout << out.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
    std::vector<std::string> inputs;
};

int cmd_validate(const ValidateArgs& a) {
    for (const auto& path : expand_inputs(a.inputs)) {
        const auto dump = daam::open_dump(path);
        std::size_t n = 0;
        for (const auto& item : daam::iterate_slices(dump)) {
            (void)item;
            ++n;
        }
        std::cout << path.string() << ": ok, " << n << " slices (" << dump.manifest.layers.size() << " layers x "
                  << dump.manifest.timesteps.size() << " steps)\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Per-word attribution maps from captured cross-attention"};
    app.require_subcommand(1);
    std::string config_file;
    app.add_option("--config", config_file, "key/value config file (default ./daam.toml)");

    ComputeArgs compute;
    auto* c = app.add_subcommand("compute", "write heat maps and hard masks for words or tokens");
    c->add_option("--input", compute.input, "dump directory");
    c->add_option("--word", compute.words, "word of the prompt (repeatable; default every word)")->delimiter(',');
    c->add_option("--token-index", compute.token_indices, "token index (repeatable)")->delimiter(',');
    c->add_option("--tau", compute.taus, "mask thresholds; 'none' for soft maps only")->delimiter(',');
    c->add_option("--out", compute.out, "output directory")->capture_default_str();
    compute.map.add_to(*c);

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "score hard maps against ground-truth segments");
    e->add_option("--input", eval.inputs, "dump directory, or a directory of dumps (repeatable)")->delimiter(',');
    e->add_option("--gt", eval.gt, "ground-truth directory with annotations.json");
    e->add_option("--classes", eval.classes, "closed class list, one name per line");
    e->add_option("--tau", eval.taus, "thresholds")->delimiter(',');
    e->add_option("--baseline", eval.baseline, "add a baseline method: random");
    e->add_option("--seed", eval.seed, "baseline seed")->capture_default_str();
    e->add_option("--out", eval.out, "report JSON path, - for stdout")->capture_default_str();
    e->add_option("--csv", eval.csv, "per-pair CSV path");
    eval.map.add_to(*e);

    PosArgs pos;
    auto* p = app.add_subcommand("pos", "hard-map intensity grouped by part of speech");
    p->add_option("--input", pos.inputs, "dump directory, or a directory of dumps (repeatable)")->delimiter(',');
    p->add_option("--tau", pos.tau, "threshold")->capture_default_str();
    p->add_option("--out", pos.out, "summary JSON path, - for stdout")->capture_default_str();
    p->add_option("--csv", pos.csv, "per-word CSV path");
    pos.map.add_to(*p);

    FixtureArgs fixture;
    auto* f = app.add_subcommand("fixture", "write a synthetic dump directory");
    f->add_option("--out", fixture.out, "output directory");
    f->add_option("--kind", fixture.kind, "random or hot-square")->capture_default_str();
    f->add_option("--layers", fixture.layers, "number of attention layers (random kind)")->capture_default_str();
    f->add_option("--steps", fixture.steps, "number of timesteps")->capture_default_str();
    f->add_option("--seed", fixture.seed, "seed")->capture_default_str();
    f->add_option("--context-length", fixture.context_length, "token context length")->capture_default_str();
    f->add_option("--latent", fixture.latent, "latent grid size")->capture_default_str();
    f->add_option("--image-scale", fixture.image_scale, "image pixels per latent cell")->capture_default_str();

    RenderArgs render;
    auto* r = app.add_subcommand("render", "overlay a heat map or hard mask on the generated image");
    r->add_option("--input", render.input, "dump directory");
    r->add_option("--word", render.word, "word of the prompt");
    r->add_option("--token-index", render.token_index, "token index");
    r->add_option("--mode", render.mode, "soft, hard_fill or hard_outline")->capture_default_str();
    r->add_option("--alpha", render.alpha, "blend weight")->capture_default_str();
    r->add_option("--colormap", render.colormap, "colormap JSON")->capture_default_str();
    r->add_option("--image", render.image, "base image (default <input>/image.png)");
    r->add_option("--tau", render.tau, "threshold for hard modes")->capture_default_str();
    r->add_option("--out", render.out, "output PNG (default <word>.<mode>.png)");
    render.map.add_to(*r);

    ValidateArgs validate;
    auto* v = app.add_subcommand("validate", "check dump directories against the format");
    v->add_option("--input", validate.inputs, "dump directory, or a directory of dumps (repeatable)")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        Fallbacks fallbacks;
        if (config_file.empty())
            if (const char* env = std::getenv("DAAM_CONFIG")) config_file = env;
        if (!config_file.empty()) {
            if (!fs::exists(config_file)) throw UsageError("config file not found: " + config_file);
            fallbacks.load(config_file);
        } else if (fs::exists("daam.toml")) {
            fallbacks.load("daam.toml");
        }
        CLI::App* sub = app.get_subcommands().front();
        // fixture flags share names with unrelated options elsewhere, so only
        // the fixture-scoped forms apply to it.
        try {
            fallbacks.apply(*sub, sub != f);
        } catch (const CLI::Error& err) {
            throw UsageError(std::string("bad value from environment or config: ") + err.what());
        }

        if (sub == c) return cmd_compute(compute);
        if (sub == e) return cmd_eval(eval);
        if (sub == p) return cmd_pos(pos);
        if (sub == f) return cmd_fixture(fixture);
        if (sub == r) return cmd_render(render);
        if (sub == v) return cmd_validate(validate);
        return kExitUsage;
    } catch (const UsageError& err) {
        std::cerr << "daam: usage: " << err.what() << "\n";
        return kExitUsage;
    } catch (const daam::Error& err) {
        std::cerr << "daam: error: " << err.what() << "\n";
        return err.kind() == daam::ErrorKind::EmptyEvaluation ? kExitEmpty : kExitInput;
    } catch (const std::exception& err) {
        std::cerr << "daam: error: " << err.what() << "\n";
        return kExitInput;
    }
}
