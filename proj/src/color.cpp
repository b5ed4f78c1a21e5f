#include "vellum/color.hpp"

#include <algorithm>
#include <cmath>

namespace vellum {
namespace color {
namespace {

double guard(double v) { return std::max(v, kColorEpsilon); }

double srgb_to_linear(double c)
{
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t)
{
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

} // namespace

std::array<double, 3> hsv(double r, double g, double b)
{
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    double h = 0.0;
    if (delta > 0.0) {
        if (mx == r) {
            h = std::fmod((g - b) / guard(delta), 6.0);
        } else if (mx == g) {
            h = (b - r) / guard(delta) + 2.0;
        } else {
            h = (r - g) / guard(delta) + 4.0;
        }
        h /= 6.0;
        if (h < 0.0) {
            h += 1.0;
        }
        if (h >= 1.0) {
            h -= 1.0;
        }
    }
    const double s = delta / guard(mx);
    return {h, s, mx};
}

std::array<double, 3> gmcr(double r, double g, double b)
{
    const double lr = std::log(guard(r));
    const double lg = std::log(guard(g));
    const double lb = std::log(guard(b));
    const double lm = (lr + lg + lb) / 3.0;
    return {lr - lm, lg - lm, lb - lm};
}

std::array<double, 3> lab(double r, double g, double b)
{
    const double rl = srgb_to_linear(r);
    const double gl = srgb_to_linear(g);
    const double bl = srgb_to_linear(b);
    const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
    const double fx = lab_f(x / 0.95047);
    const double fy = lab_f(y / 1.00000);
    const double fz = lab_f(z / 1.08883);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::array<double, 4> cmyk(double r, double g, double b)
{
    const double k = 1.0 - std::max({r, g, b});
    const double denom = guard(1.0 - k);
    return {(1.0 - r - k) / denom, (1.0 - g - k) / denom, (1.0 - b - k) / denom, k};
}

double gmcr_bound()
{
    return 2.0 / 3.0 * -std::log(kColorEpsilon);
}

} // namespace color

int channel_count(FeatureSpace space)
{
    return space == FeatureSpace::CMYK ? 4 : 3;
}

Image convert_colorspace(const Image& img, FeatureSpace target)
{
    if (img.channels() != 3) {
        throw InvalidInput("colour conversion needs a 3-channel image");
    }
    if (img.color_space() != ColorSpace::SRGB) {
        throw InvalidInput("colour conversion needs an sRGB-tagged image");
    }
    const int nc = channel_count(target);
    Image out(img.width(), img.height(), nc, ColorSpace::LinearRGB);
    const double gb = color::gmcr_bound();
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const double r = src[3 * i];
        const double g = src[3 * i + 1];
        const double b = src[3 * i + 2];
        double* o = dst.data() + i * static_cast<std::size_t>(nc);
        switch (target) {
        case FeatureSpace::HSV: {
            const auto v = color::hsv(r, g, b);
            std::copy(v.begin(), v.end(), o);
            break;
        }
        case FeatureSpace::GMCR: {
            const auto v = color::gmcr(r, g, b);
            for (int c = 0; c < 3; ++c) {
                o[c] = (v[c] + gb) / (2.0 * gb);
            }
            break;
        }
        case FeatureSpace::CIELAB: {
            const auto v = color::lab(r, g, b);
            o[0] = v[0] / 100.0;
            o[1] = (v[1] + 128.0) / 255.0;
            o[2] = (v[2] + 128.0) / 255.0;
            break;
        }
        case FeatureSpace::CMYK: {
            const auto v = color::cmyk(r, g, b);
            std::copy(v.begin(), v.end(), o);
            break;
        }
        }
    }
    out.clamp01();
    return out;
}

} // namespace vellum
