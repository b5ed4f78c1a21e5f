#include "vellum/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vellum {

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::MalformedAnnotation: return "malformed-annotation";
    case ErrorKind::DegenerateResult: return "degenerate-result";
    case ErrorKind::InfeasibleDomain: return "infeasible-domain";
    case ErrorKind::NumericalFailure: return "numerical-failure";
    case ErrorKind::IllPosed: return "ill-posed";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

std::size_t count(const BinaryMask& mask)
{
    return static_cast<std::size_t>(std::count_if(
        mask.values().begin(), mask.values().end(), [](std::uint8_t v) { return v != 0; }));
}

Image::Image(int width, int height, int channels, ColorSpace space)
    : width_(width), height_(height), channels_(channels), space_(space)
{
    if (width < 0 || height < 0) {
        throw InvalidInput("image dimensions must be non-negative");
    }
    if (channels != 1 && channels != 3 && channels != 4) {
        throw InvalidInput("image must have 1, 3 or 4 channels, got " + std::to_string(channels));
    }
    data_.assign(pixel_count() * static_cast<std::size_t>(channels), 0.0);
}

Image::Image(int width, int height, int channels, std::vector<double> data, ColorSpace space)
    : Image(width, height, channels, space)
{
    if (data.size() != data_.size()) {
        throw InvalidInput("image data length " + std::to_string(data.size()) + " does not match "
                           + std::to_string(width) + "x" + std::to_string(height) + "x"
                           + std::to_string(channels));
    }
    data_ = std::move(data);
    validate();
}

void Image::clamp01() noexcept
{
    for (double& v : data_) {
        v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    }
}

void Image::validate() const
{
    for (std::size_t i = 0; i < data_.size(); ++i) {
        const double v = data_[i];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw InvalidInput("image sample " + std::to_string(i) + " = " + std::to_string(v)
                               + " is outside [0,1]");
        }
    }
}

Grid<double> Image::channel(int c) const
{
    if (c < 0 || c >= channels_) {
        throw InvalidInput("channel index out of range");
    }
    Grid<double> out(width_, height_);
    for (std::size_t i = 0; i < pixel_count(); ++i) {
        out[i] = data_[i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)];
    }
    return out;
}

void Image::set_channel(int c, const Grid<double>& values)
{
    if (c < 0 || c >= channels_ || !values.same_shape(width_, height_)) {
        throw InvalidInput("set_channel: channel index or shape mismatch");
    }
    for (std::size_t i = 0; i < pixel_count(); ++i) {
        data_[i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)] = values[i];
    }
}

Image to_gray(const Image& img)
{
    if (img.channels() == 1) {
        return img;
    }
    Image out(img.width(), img.height(), 1, ColorSpace::Gray);
    auto src = img.data();
    auto dst = out.data();
    const auto nc = static_cast<std::size_t>(img.channels());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        dst[i] = 0.299 * src[i * nc] + 0.587 * src[i * nc + 1] + 0.114 * src[i * nc + 2];
    }
    out.clamp01();
    return out;
}

Image image_from_grid(const Grid<double>& values)
{
    Image out(values.width(), values.height(), 1, ColorSpace::Gray);
    std::copy(values.values().begin(), values.values().end(), out.data().begin());
    out.clamp01();
    return out;
}

double psnr(const Image& a, const Image& b, const BinaryMask* region)
{
    if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels()) {
        throw InvalidInput("psnr: image shapes differ");
    }
    const bool restrict = region != nullptr && count(*region) > 0;
    if (restrict && !region->same_shape(a.width(), a.height())) {
        throw InvalidInput("psnr: region shape differs");
    }
    double sse = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (restrict && (*region)(x, y) == 0) {
                continue;
            }
            for (int c = 0; c < a.channels(); ++c) {
                const double d = a.at(x, y, c) - b.at(x, y, c);
                sse += d * d;
                ++n;
            }
        }
    }
    if (n == 0 || sse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(1.0 / (sse / static_cast<double>(n)));
}

} // namespace vellum
