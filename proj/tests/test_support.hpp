#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <unistd.h>

#include "daam/grid.hpp"
#include "daam/rng.hpp"

namespace daam::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("daam_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline Grid<double> random_grid(Xoshiro256StarStar& rng, std::size_t h, std::size_t w, double scale = 1.0) {
    Grid<double> g(h, w);
    for (auto& v : g) v = rng.uniform() * scale;
    return g;
}

inline Mask random_mask(Xoshiro256StarStar& rng, std::size_t h, std::size_t w, double p = 0.5) {
    Mask m(h, w, 0);
    for (auto& v : m) v = rng.uniform() < p ? 1 : 0;
    return m;
}

} // namespace daam::testing
