#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vellum/image.hpp"

namespace vellum {

/// Per-pixel feature vectors, row-major, `dim` values per pixel.
class FeatureImage {
public:
    FeatureImage() = default;
    FeatureImage(int width, int height, int dim);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int dim() const noexcept { return dim_; }
    std::size_t pixel_count() const noexcept
    {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }

    std::span<double> at(std::size_t pixel) noexcept
    {
        return {data_.data() + pixel * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    std::span<const double> at(std::size_t pixel) const noexcept
    {
        return {data_.data() + pixel * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    /// Min-max rescales every feature channel over the image; constant
    /// channels map to 0.
    void normalize();

private:
    int width_ = 0;
    int height_ = 0;
    int dim_ = 0;
    std::vector<double> data_;
};

/// HSV + GMCR + CIELAB + CMYK.
inline constexpr int kFeatureDim = 13;

/// Concatenates the HSV, GMCR, CIELAB and CMYK transforms per pixel, then
/// normalizes each of the 13 channels.
FeatureImage compute_features(const Image& img, bool normalize = true);

/// Raw image samples as features (used for RGB-only clustering).
FeatureImage features_from_image(const Image& img);

} // namespace vellum
