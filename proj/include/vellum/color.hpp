#pragma once

#include <array>

#include "vellum/image.hpp"

namespace vellum {

enum class FeatureSpace { HSV, GMCR, CIELAB, CMYK };

/// Guard applied to every logarithm argument and divisor in the colour
/// transforms; real scans contain exact-zero channels.
inline constexpr double kColorEpsilon = 1e-6;

namespace color {

/// Hue in [0,1) (fraction of a turn), saturation and value in [0,1].
std::array<double, 3> hsv(double r, double g, double b);
/// Geometric-mean chromaticity (log(R/m), log(G/m), log(B/m)), m = cbrt(RGB).
std::array<double, 3> gmcr(double r, double g, double b);
/// CIELAB (L in [0,100]) from sRGB, D65 white.
std::array<double, 3> lab(double r, double g, double b);
/// Naive CMYK with K = 1 - max(R,G,B).
std::array<double, 4> cmyk(double r, double g, double b);

/// Half-width of the GMCR range for channels guarded at kColorEpsilon.
double gmcr_bound();

} // namespace color

/// Per-pixel transform of a 3-channel sRGB image into `target`, each output
/// channel rescaled into [0,1] by the fixed range of that space.
Image convert_colorspace(const Image& img, FeatureSpace target);

int channel_count(FeatureSpace space);

} // namespace vellum
