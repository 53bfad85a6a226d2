#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "daam/daam.hpp"
#include "test_support.hpp"

using namespace daam;
using daam::testing::slurp;
using daam::testing::TempDir;
namespace fs = std::filesystem;

namespace {

// Runs the tool inside `cwd` with a clean DAAM_* environment plus `env`.
int run(const fs::path& cwd, const std::string& args, const std::string& env = "") {
    const std::string cmd = "cd '" + cwd.string() + "' && env -u DAAM_CONFIG -u DAAM_TAU -u DAAM_COMPUTE_TAU " + env +
                            " '" + DAAM_CLI_PATH + "' " + args + " >stdout.txt 2>stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::vector<std::string> listing(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

Mask square_mask(std::size_t n, std::size_t r0, std::size_t c0, std::size_t size) {
    Mask m(n, n, 0);
    for (std::size_t r = r0; r < r0 + size; ++r)
        for (std::size_t c = c0; c < c0 + size; ++c) m(r, c) = 1;
    return m;
}

} // namespace

TEST(Cli, FixtureIsByteIdenticalAcrossRuns) {
    TempDir dir;
    ASSERT_EQ(run(dir.path(), "fixture --out a --layers 3 --steps 5 --seed 1"), 0);
    ASSERT_EQ(run(dir.path(), "fixture --out b --layers 3 --steps 5 --seed 1"), 0);
    const auto files = listing(dir / "a");
    ASSERT_EQ(files, listing(dir / "b"));
    EXPECT_EQ(files.size(), 3u * 5u + 2u);  // slices, manifest.json, image.png
    for (const auto& f : files) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    ASSERT_EQ(run(dir.path(), "fixture --out c --layers 3 --steps 5 --seed 2"), 0);
    EXPECT_NE(slurp(dir / "a" / "down_0_1.attn"), slurp(dir / "c" / "down_0_1.attn"));
}

TEST(Cli, FixtureUsageErrors) {
    TempDir dir;
    EXPECT_EQ(run(dir.path(), "fixture --out z --layers 0"), 64);
    EXPECT_EQ(run(dir.path(), "fixture --out z --kind spiral"), 64);
    EXPECT_EQ(run(dir.path(), "fixture"), 64);
    EXPECT_EQ(run(dir.path(), "fixture --out z --steps nope"), 64);
    EXPECT_EQ(run(dir.path(), ""), 64);
    EXPECT_EQ(run(dir.path(), "--help"), 0);
}

TEST(Cli, ComputeWritesNamedFiles) {
    TempDir dir;
    ASSERT_EQ(run(dir.path(), "fixture --out fx --kind hot-square"), 0);
    ASSERT_EQ(run(dir.path(), "compute --input fx --word teapot --out out"), 0);
    EXPECT_EQ(listing(dir / "out"), (std::vector<std::string>{"index.json", "teapot.heat.attn", "teapot.heat.png",
                                                               "teapot.tau0.3.png", "teapot.tau0.4.png",
                                                               "teapot.tau0.5.png"}));
    const auto index = load_json(dir / "out" / "index.json");
    ASSERT_EQ(index["maps"].size(), 1u);
    EXPECT_EQ(index["maps"][0]["text"], "teapot");
    EXPECT_EQ(index["maps"][0]["tokens"], nlohmann::json::array({9}));

    // The written map equals the library's word map.
    const auto dump = open_dump(dir / "fx");
    const auto expected = word_heat_map(dump, 5);
    const auto arr = read_attn_file(dir / "out" / "teapot.heat.attn");
    ASSERT_EQ(arr.data.size(), expected.data.size());
    for (std::size_t i = 0; i < arr.data.size(); ++i) EXPECT_EQ(arr.data[i], static_cast<float>(expected.data.values()[i]));
    const auto mask = read_png_mask(dir / "out" / "teapot.tau0.4.png");
    EXPECT_EQ(mask, threshold(expected, 0.4).data);
}

TEST(Cli, ComputeDefaultsAndSelectors) {
    TempDir dir;
    ASSERT_EQ(run(dir.path(), "fixture --out fx"), 0);
    ASSERT_EQ(run(dir.path(), "compute --input fx --out all --tau none"), 0);
    const auto files = listing(dir / "all");
    EXPECT_EQ(files.size(), 1u + 7u * 2u);  // index plus two files per word, no masks
    EXPECT_TRUE(std::count(files.begin(), files.end(), "strawberries.heat.attn"));
    ASSERT_EQ(run(dir.path(), "compute --input fx --token-index 4,5 --tau 0.4 --out tok"), 0);
    EXPECT_TRUE(fs::exists(dir / "tok" / "token4.tau0.4.png"));
    EXPECT_TRUE(fs::exists(dir / "tok" / "token5.heat.png"));
}

TEST(Cli, ComputeErrors) {
    TempDir dir;
    ASSERT_EQ(run(dir.path(), "fixture --out fx"), 0);
    EXPECT_EQ(run(dir.path(), "compute --input fx --word unicorn"), 1);
    EXPECT_NE(slurp(dir / "stderr.txt").find("UnknownWord"), std::string::npos);
    EXPECT_EQ(run(dir.path(), "compute --input fx --token-index 99"), 1);
    EXPECT_EQ(run(dir.path(), "compute --input nowhere --word teapot"), 1);
    EXPECT_EQ(run(dir.path(), "compute --input fx --tau 1.5"), 64);
    EXPECT_EQ(run(dir.path(), "compute --input fx --upsample nearest"), 64);
    EXPECT_EQ(run(dir.path(), "compute --input fx --layers sideways"), 64);
    EXPECT_EQ(run(dir.path(), "compute --word teapot"), 64);
    fs::remove(dir / "fx" / "up_2_1.attn");
    EXPECT_EQ(run(dir.path(), "compute --input fx --word teapot"), 1);
    EXPECT_NE(slurp(dir / "stderr.txt").find("MissingSlice"), std::string::npos);
    EXPECT_EQ(run(dir.path(), "validate --input fx"), 1);
}

class CliEval : public ::testing::Test {
protected:
    // Two hot-square dumps; the first image's teapot is annotated with the
    // true square, the second with a square shifted by 8 pixels.
    void SetUp() override {
        ASSERT_EQ(run(dir.path(), "fixture --out dumps/img0 --kind hot-square --seed 1"), 0);
        ASSERT_EQ(run(dir.path(), "fixture --out dumps/img1 --kind hot-square --seed 2"), 0);
        fs::create_directories(dir / "gt");
        gt0 = square_mask(64, 16, 16, 32);
        gt1 = square_mask(64, 24, 24, 32);
        write_mask_png(gt0, dir / "gt" / "img0_teapot.png");
        write_mask_png(gt1, dir / "gt" / "img1_teapot.png");
        std::ofstream(dir / "gt" / "annotations.json") << R"([
  {"image_id": "img0", "noun": "teapot", "class_label": "teapot", "mask_file": "img0_teapot.png"},
  {"image_id": "img1", "noun": "teapot", "class_label": "teapot", "mask_file": "img1_teapot.png"}
])";
        std::ofstream(dir / "classes.txt") << "cat\ndog\n";
    }

    // IoU of the predicted mask written by `compute`, counted pixel by pixel.
    double hand_iou(const std::string& image, const Mask& gt) {
        EXPECT_EQ(run(dir.path(), "compute --input dumps/" + image + " --word teapot --tau 0.4 --out pred_" + image), 0);
        const auto pred = read_png_mask(dir / ("pred_" + image) / "teapot.tau0.4.png");
        long inter = 0, uni = 0;
        for (std::size_t r = 0; r < 64; ++r)
            for (std::size_t c = 0; c < 64; ++c) {
                inter += pred(r, c) && gt(r, c);
                uni += pred(r, c) || gt(r, c);
            }
        return double(inter) / double(uni);
    }

    TempDir dir;
    Mask gt0, gt1;
};

TEST_F(CliEval, ReportMatchesHandCount) {
    ASSERT_EQ(run(dir.path(), "eval --input dumps --gt gt --tau 0.4 --out report.json --csv rows.csv"), 0);
    const auto report = load_json(dir / "report.json");
    ASSERT_EQ(report["reports"].size(), 1u);
    const auto& r = report["reports"][0];
    EXPECT_EQ(r["method"], "daam");
    EXPECT_EQ(r["restriction"], "open");
    EXPECT_EQ(r["pairs_per_tau"]["0.4"], 2);
    const double a = hand_iou("img0", gt0), b = hand_iou("img1", gt1);
    EXPECT_GT(a, b);
    EXPECT_EQ(r["miou"]["0.4"].get<double>(), (std::min(a, b) + std::max(a, b)) / 2.0);
    const auto csv = slurp(dir / "rows.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_EQ(csv.rfind("method,restriction,image_id,noun,class_label,tau,iou\n", 0), 0u);
}

TEST_F(CliEval, ClosedListExcludingEverythingIsEmpty) {
    EXPECT_EQ(run(dir.path(), "eval --input dumps --gt gt --classes classes.txt --out report.json"), 2);
    EXPECT_NE(slurp(dir / "stderr.txt").find("EmptyEvaluation"), std::string::npos);
}

TEST_F(CliEval, ClosedListKeepsListedClasses) {
    std::ofstream(dir / "classes.txt") << "Teapot\n";
    ASSERT_EQ(run(dir.path(), "eval --input dumps --gt gt --classes classes.txt --out report.json"), 0);
    const auto report = load_json(dir / "report.json");
    ASSERT_EQ(report["reports"].size(), 2u);
    EXPECT_EQ(report["reports"][1]["restriction"], "closed_list");
    EXPECT_EQ(report["reports"][0]["miou"], report["reports"][1]["miou"]);
}

TEST_F(CliEval, RandomBaselineIsReproducible) {
    ASSERT_EQ(run(dir.path(), "eval --input dumps --gt gt --baseline random --seed 7 --out a.json --csv a.csv"), 0);
    ASSERT_EQ(run(dir.path(), "eval --input dumps --gt gt --baseline random --seed 7 --out b.json --csv b.csv"), 0);
    EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    const auto report = load_json(dir / "a.json");
    ASSERT_EQ(report["reports"].size(), 2u);
    const auto& base = report["reports"][1];
    EXPECT_EQ(base["method"], "random");
    // Pair i uses seed + i.
    const double expected = (iou(random_baseline(64, 64, 7), gt0) + iou(random_baseline(64, 64, 8), gt1));
    EXPECT_NEAR(base["miou"]["0.5"].get<double>(), expected / 2.0, 1e-15);
    ASSERT_EQ(run(dir.path(), "eval --input dumps --gt gt --baseline random --seed 8 --out c.json"), 0);
    EXPECT_NE(slurp(dir / "a.json"), slurp(dir / "c.json"));
}

TEST_F(CliEval, UnmatchedNounsAreSkipped) {
    std::ofstream(dir / "gt" / "annotations.json") << R"([
  {"image_id": "img0", "noun": "kettle", "mask_file": "img0_teapot.png"},
  {"image_id": "img7", "noun": "teapot", "mask_file": "img0_teapot.png"}
])";
    EXPECT_EQ(run(dir.path(), "eval --input dumps --gt gt --out r.json"), 2);
    std::ofstream(dir / "gt" / "annotations.json") << R"([
  {"image_id": "img0", "noun": "teapot", "mask_file": "img0_teapot.png"},
  {"image_id": "img7", "noun": "teapot", "mask_file": "img0_teapot.png"}
])";
    ASSERT_EQ(run(dir.path(), "eval --input dumps --gt gt --out r.json"), 0);
    const auto report = load_json(dir / "r.json");
    ASSERT_EQ(report["skipped"].size(), 1u);
    EXPECT_EQ(report["skipped"][0]["reason"], "no dump for image");
}

TEST(Cli, PosSummaryAndTauNesting) {
    TempDir dir;
    ASSERT_EQ(run(dir.path(), "fixture --out corpus/a --seed 3"), 0);
    ASSERT_EQ(run(dir.path(), "fixture --out corpus/b --seed 4"), 0);
    ASSERT_EQ(run(dir.path(), "pos --input corpus --out p4.json --csv p4.csv"), 0);
    ASSERT_EQ(run(dir.path(), "pos --input corpus --tau 0.5 --out p5.json"), 0);
    const auto p4 = load_json(dir / "p4.json"), p5 = load_json(dir / "p5.json");
    EXPECT_EQ(p4["tau"], 0.4);
    EXPECT_EQ(p4["groups"].size(), 5u);
    EXPECT_EQ(p4["groups"]["NOUN"]["count"], 6);
    ASSERT_EQ(p4["records"].size(), 14u);
    for (std::size_t i = 0; i < 14; ++i) {
        EXPECT_EQ(p4["records"][i]["word"], p5["records"][i]["word"]);
        EXPECT_LE(p5["records"][i]["intensity"].get<double>(), p4["records"][i]["intensity"].get<double>());
    }
    const auto csv = slurp(dir / "p4.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 15);
}

TEST(Cli, PosTwoTags) {
    TempDir dir;
    auto fx = make_fixture({});
    for (auto& t : fx.manifest.tokens) {
        if (!t.word_index) continue;
        if (*t.word_index == 4) t.pos_tag = "DET";
        else if (*t.word_index == 5) t.pos_tag = "NOUN";
        else t.pos_tag.reset();
    }
    write_fixture(fx, dir / "fx");
    ASSERT_EQ(run(dir.path(), "pos --input fx --out p.json"), 0);
    const auto p = load_json(dir / "p.json");
    ASSERT_EQ(p["groups"].size(), 2u);
    EXPECT_TRUE(p["groups"].contains("DET"));
    EXPECT_TRUE(p["groups"].contains("NOUN"));
}

TEST(Cli, PosWithoutTagsWarns) {
    TempDir dir;
    auto fx = make_fixture({});
    for (auto& t : fx.manifest.tokens) t.pos_tag.reset();
    write_fixture(fx, dir / "fx");
    ASSERT_EQ(run(dir.path(), "pos --input fx --out p.json"), 0);
    EXPECT_TRUE(load_json(dir / "p.json")["groups"].empty());
    EXPECT_NE(slurp(dir / "stderr.txt").find("warning"), std::string::npos);
}

TEST(Cli, ConfigurationPrecedence) {
    TempDir dir;
    ASSERT_EQ(run(dir.path(), "fixture --out fx"), 0);
    std::ofstream(dir / "daam.toml") << "tau = \"0.1\"\n[compute]\nout = \"from_config\"\n";
    auto masks = [&](const std::string& sub) {
        std::vector<std::string> out;
        for (const auto& f : listing(dir / sub))
            if (f.find(".tau") != std::string::npos) out.push_back(f);
        return out;
    };
    using V = std::vector<std::string>;
    ASSERT_EQ(run(dir.path(), "compute --input fx --word teapot"), 0);
    EXPECT_EQ(masks("from_config"), V{"teapot.tau0.1.png"});
    ASSERT_EQ(run(dir.path(), "compute --input fx --word teapot --out env", "DAAM_TAU=0.2"), 0);
    EXPECT_EQ(masks("env"), V{"teapot.tau0.2.png"});
    ASSERT_EQ(run(dir.path(), "compute --input fx --word teapot --out scoped", "DAAM_TAU=0.2 DAAM_COMPUTE_TAU=0.3"), 0);
    EXPECT_EQ(masks("scoped"), V{"teapot.tau0.3.png"});
    ASSERT_EQ(run(dir.path(), "compute --input fx --word teapot --out flag --tau 0.4", "DAAM_COMPUTE_TAU=0.3"), 0);
    EXPECT_EQ(masks("flag"), V{"teapot.tau0.4.png"});
    fs::remove(dir / "daam.toml");
    ASSERT_EQ(run(dir.path(), "compute --input fx --word teapot --out defaults"), 0);
    EXPECT_EQ(masks("defaults"), (V{"teapot.tau0.3.png", "teapot.tau0.4.png", "teapot.tau0.5.png"}));
    std::ofstream(dir / "other.toml") << "[compute]\ntau = [0.6, 0.7]\n";
    ASSERT_EQ(run(dir.path(), "compute --input fx --word teapot --out explicit", "DAAM_CONFIG=other.toml"), 0);
    EXPECT_EQ(masks("explicit"), (V{"teapot.tau0.6.png", "teapot.tau0.7.png"}));
    EXPECT_EQ(run(dir.path(), "--config missing.toml compute --input fx"), 64);
    EXPECT_EQ(run(dir.path(), "compute --input fx --word teapot", "DAAM_TAU=abc"), 64);
}

TEST(Cli, RenderWritesOverlay) {
    TempDir dir;
    ASSERT_EQ(run(dir.path(), "fixture --out fx --kind hot-square"), 0);
    ASSERT_EQ(run(dir.path(), "render --input fx --word teapot --out soft.png"), 0);
    ASSERT_EQ(run(dir.path(), "render --input fx --word teapot --mode hard_outline --out outline.png"), 0);
    ASSERT_EQ(run(dir.path(), "render --input fx --word teapot --alpha 0 --out same.png"), 0);
    const auto image = read_png_rgb(dir / "fx" / "image.png");
    EXPECT_EQ(read_png_rgb(dir / "same.png"), image);
    EXPECT_EQ(slurp(dir / "same.png"), slurp(dir / "fx" / "image.png"));
    EXPECT_NE(read_png_rgb(dir / "soft.png"), image);
    EXPECT_EQ(read_png_rgb(dir / "soft.png").height, 64u);
    EXPECT_EQ(run(dir.path(), "render --input fx --word teapot --mode glow"), 64);
    EXPECT_EQ(run(dir.path(), "render --input fx --word teapot --alpha 2"), 64);
    EXPECT_EQ(run(dir.path(), "render --input fx"), 64);
}

TEST(Cli, ValidateAcceptsFixtures) {
    TempDir dir;
    ASSERT_EQ(run(dir.path(), "fixture --out set/a --layers 4 --steps 2"), 0);
    ASSERT_EQ(run(dir.path(), "fixture --out set/b --kind hot-square"), 0);
    ASSERT_EQ(run(dir.path(), "validate --input set"), 0);
    const auto out = slurp(dir / "stdout.txt");
    EXPECT_NE(out.find("8 slices"), std::string::npos);
    EXPECT_NE(out.find("30 slices"), std::string::npos);
}
