#include "vellum/features.hpp"

#include <algorithm>
#include <array>

#include "vellum/color.hpp"

namespace vellum {

FeatureImage::FeatureImage(int width, int height, int dim)
    : width_(width), height_(height), dim_(dim)
{
    if (width < 0 || height < 0 || dim <= 0) {
        throw InvalidInput("invalid feature image shape");
    }
    data_.assign(pixel_count() * static_cast<std::size_t>(dim), 0.0);
}

void FeatureImage::normalize()
{
    const std::size_t n = pixel_count();
    if (n == 0) {
        return;
    }
    for (int c = 0; c < dim_; ++c) {
        double lo = data_[static_cast<std::size_t>(c)];
        double hi = lo;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = data_[i * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(c)];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double range = hi - lo;
        for (std::size_t i = 0; i < n; ++i) {
            double& v = data_[i * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(c)];
            v = range > 1e-12 ? (v - lo) / range : 0.0;
        }
    }
}

FeatureImage compute_features(const Image& img, bool normalize)
{
    constexpr std::array spaces{FeatureSpace::HSV, FeatureSpace::GMCR, FeatureSpace::CIELAB, FeatureSpace::CMYK};
    FeatureImage out(img.width(), img.height(), kFeatureDim);
    int base = 0;
    for (FeatureSpace space : spaces) {
        const Image conv = convert_colorspace(img, space);
        const int nc = conv.channels();
        auto src = conv.data();
        for (std::size_t i = 0; i < out.pixel_count(); ++i) {
            auto dst = out.at(i);
            for (int c = 0; c < nc; ++c) {
                dst[static_cast<std::size_t>(base + c)] = src[i * static_cast<std::size_t>(nc) + static_cast<std::size_t>(c)];
            }
        }
        base += nc;
    }
    if (normalize) {
        out.normalize();
    }
    return out;
}

FeatureImage features_from_image(const Image& img)
{
    FeatureImage out(img.width(), img.height(), img.channels());
    std::copy(img.data().begin(), img.data().end(), out.data().begin());
    return out;
}

} // namespace vellum
