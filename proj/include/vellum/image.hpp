#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vellum/error.hpp"

namespace vellum {

/// Integer pixel coordinate. Ordering is lexicographic in (row, col), which is
/// the tie-breaking order used throughout the library.
struct Pixel {
    int x = 0;
    int y = 0;

    friend bool operator==(const Pixel&, const Pixel&) = default;
    friend std::strong_ordering operator<=>(const Pixel& a, const Pixel& b)
    {
        if (auto c = a.y <=> b.y; c != 0) {
            return c;
        }
        return a.x <=> b.x;
    }
};

/// Dense single-valued raster, row-major.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height)
    {
        if (width < 0 || height < 0) {
            throw InvalidInput("grid dimensions must be non-negative");
        }
        values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    bool contains(int x, int y) const noexcept
    {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }
    std::size_t index(int x, int y) const noexcept
    {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    T& operator()(int x, int y) { return values_[index(x, y)]; }
    const T& operator()(int x, int y) const { return values_[index(x, y)]; }
    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }

    bool same_shape(int width, int height) const noexcept
    {
        return width_ == width && height_ == height;
    }
    template <typename U>
    bool same_shape(const Grid<U>& other) const noexcept
    {
        return same_shape(other.width(), other.height());
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> values_;
};

/// 0 = outside, 1 = inside.
using BinaryMask = Grid<std::uint8_t>;

std::size_t count(const BinaryMask& mask);

enum class ColorSpace { LinearRGB, SRGB, Gray };

/// Multi-channel floating-point raster with samples in [0,1], row-major and
/// channel-interleaved.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, ColorSpace space = ColorSpace::SRGB);
    /// Takes ownership of `data`; throws InvalidInput when the size does not
    /// match or any sample is non-finite or outside [0,1].
    Image(int width, int height, int channels, std::vector<double> data, ColorSpace space);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    ColorSpace color_space() const noexcept { return space_; }
    void set_color_space(ColorSpace space) noexcept { space_ = space; }
    std::size_t pixel_count() const noexcept
    {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept
    {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }
    std::size_t offset(int x, int y) const noexcept
    {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x))
            * static_cast<std::size_t>(channels_);
    }

    double& at(int x, int y, int c = 0) { return data_[offset(x, y) + static_cast<std::size_t>(c)]; }
    double at(int x, int y, int c = 0) const { return data_[offset(x, y) + static_cast<std::size_t>(c)]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    /// Clamps every sample into [0,1]; NaN becomes 0.
    void clamp01() noexcept;
    /// Throws InvalidInput if any sample is non-finite or outside [0,1].
    void validate() const;

    Grid<double> channel(int c) const;
    void set_channel(int c, const Grid<double>& values);

    friend bool operator==(const Image&, const Image&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    ColorSpace space_ = ColorSpace::SRGB;
    std::vector<double> data_;
};

/// Rec. 601 luma for 3/4-channel images, identity for gray.
Image to_gray(const Image& img);

/// Builds a single-channel image from a grid, clamping into [0,1].
Image image_from_grid(const Grid<double>& values);

/// Peak signal-to-noise ratio on [0,1] data restricted to `region`
/// (all pixels if the region is empty). Returns +inf for identical inputs.
double psnr(const Image& a, const Image& b, const BinaryMask* region = nullptr);

} // namespace vellum
