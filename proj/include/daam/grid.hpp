#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "daam/error.hpp"

namespace daam {

/// Dense row-major 2-D array. Row index first, matching (x, y) = (row, col).
template <class T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    Grid(std::size_t height, std::size_t width, T fill = T{})
        : height_(height), width_(width), data_(height * width, fill) {}
    Grid(std::size_t height, std::size_t width, std::vector<T> data)
        : height_(height), width_(width), data_(std::move(data)) {
        if (data_.size() != height_ * width_)
            throw Error(ErrorKind::ShapeMismatch, "grid storage does not match its dimensions");
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }
    const T& operator()(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    bool same_shape(const Grid& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> data_;
};

/// Binary masks store 0/1 bytes; std::vector<bool> gives no contiguous span.
using Mask = Grid<std::uint8_t>;

inline std::size_t count_true(const Mask& mask) {
    std::size_t n = 0;
    for (auto v : mask)
        n += v != 0;
    return n;
}

} // namespace daam
