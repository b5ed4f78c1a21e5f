#include "vellum/stereo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace vellum {
namespace {

struct DepthAt {
    double x, y;
    bool* clamped;

    void flag() const
    {
        if (clamped != nullptr) {
            *clamped = true;
        }
    }

    double operator()(const PlanePrimitive& p) const
    {
        if (!p.ramp) {
            return p.z0;
        }
        const auto [x0, y0, x1, y1, z1] = *p.ramp;
        const double dx = x1 - x0;
        const double dy = y1 - y0;
        const double len2 = dx * dx + dy * dy;
        if (len2 == 0.0) {
            return p.z0;
        }
        const double t = ((x - x0) * dx + (y - y0) * dy) / len2;
        return p.z0 + t * (z1 - p.z0);
    }

    double operator()(const SpherePrimitive& s) const
    {
        const double d2 = (x - s.cx) * (x - s.cx) + (y - s.cy) * (y - s.cy);
        if (d2 > s.radius * s.radius) {
            flag();
            return s.z0;
        }
        return s.z0 - std::sqrt(s.radius * s.radius - d2);
    }

    double operator()(const CylinderPrimitive& c) const
    {
        const double a = c.angle_deg * std::numbers::pi / 180.0;
        const double dist = std::abs(-(x - c.cx) * std::sin(a) + (y - c.cy) * std::cos(a));
        if (dist > c.radius) {
            flag();
            return c.z0;
        }
        return c.z0 - std::sqrt(c.radius * c.radius - dist * dist);
    }

    double operator()(const ConePrimitive& c) const
    {
        const double dist = std::hypot(x - c.cx, y - c.cy);
        if (dist > c.radius) {
            flag();
            return c.z0;
        }
        return c.z_apex + (c.z0 - c.z_apex) * dist / c.radius;
    }
};

} // namespace

double primitive_depth(const Primitive& prim, double x, double y, bool* clamped)
{
    if (clamped != nullptr) {
        *clamped = false;
    }
    return std::visit(DepthAt{x, y, clamped}, prim);
}

ComposedDepth compose_depth(const std::vector<LayerSpec>& layers, int width, int height, double background_depth)
{
    if (!(background_depth > 0.0) || !std::isfinite(background_depth)) {
        throw InvalidInput("compose_depth: background depth must be positive");
    }
    ComposedDepth out{DepthMap(width, height, background_depth), Grid<int>(width, height, -1), {}};
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const LayerSpec& layer = layers[li];
        const std::string label = layer.name.empty() ? "layer " + std::to_string(li) : layer.name;
        if (!layer.mask.same_shape(width, height)) {
            throw InvalidInput("compose_depth: mask of " + label + " does not match the image size");
        }
        std::size_t clamped_count = 0;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                if (layer.mask(x, y) == 0) {
                    continue;
                }
                bool clamped = false;
                const double z = primitive_depth(layer.primitive, x, y, &clamped);
                if (!(z > 0.0) || !std::isfinite(z)) {
                    throw InvalidInput("compose_depth: " + label + " yields non-positive depth at ("
                                       + std::to_string(x) + "," + std::to_string(y) + ")");
                }
                clamped_count += clamped ? 1 : 0;
                out.depth(x, y) = z;
                out.layer(x, y) = static_cast<int>(li);
            }
        }
        if (clamped_count > 0) {
            out.warnings.push_back(label + ": " + std::to_string(clamped_count)
                                   + " masked pixels outside the primitive, clamped to its base depth");
        }
    }
    return out;
}

void CameraPose::validate() const
{
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
        throw InvalidInput("camera: field of view must lie in (0, 180) degrees");
    }
    const auto& o = orientation;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) {
                dot += o[static_cast<std::size_t>(3 * i + k)] * o[static_cast<std::size_t>(3 * j + k)];
            }
            if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-9) {
                throw InvalidInput("camera: orientation is not orthonormal");
            }
        }
    }
    const double off_axis = std::hypot(baseline[1], baseline[2]);
    if (off_axis > 1e-12 * std::max(1.0, std::abs(baseline[0]))) {
        throw InvalidInput("camera: only horizontal baselines are supported");
    }
}

double CameraPose::focal_pixels(int width) const
{
    return 0.5 * width / std::tan(0.5 * fov_deg * std::numbers::pi / 180.0);
}

double CameraPose::disparity(int width, double z) const
{
    return focal_pixels(width) * baseline[0] / z;
}

Reprojection reproject(const Image& img, const DepthMap& depth, const CameraPose& cam)
{
    cam.validate();
    const int w = img.width();
    const int h = img.height();
    const int nc = img.channels();
    if (!depth.same_shape(w, h)) {
        throw InvalidInput("reproject: depth and image dimensions differ");
    }
    for (double z : depth.values()) {
        if (!(z > 0.0) || !std::isfinite(z)) {
            throw InvalidInput("reproject: depth must be positive and finite");
        }
    }
    Reprojection r{Image(w, h, nc, img.color_space()), BinaryMask(w, h, 1), DepthMap(w, h, 0.0)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double z = depth(x, y);
            const int xt = static_cast<int>(std::floor(x - cam.disparity(w, z) + 0.5));
            if (xt < 0 || xt >= w) {
                continue;
            }
            if (r.holes(xt, y) == 0 && !(z < r.depth(xt, y))) {
                continue;
            }
            r.holes(xt, y) = 0;
            r.depth(xt, y) = z;
            for (int c = 0; c < nc; ++c) {
                r.image.at(xt, y, c) = img.at(x, y, c);
            }
        }
    }
    double far = 0.0;
    for (double z : depth.values()) {
        far = std::max(far, z);
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w;) {
            if (r.holes(x, y) == 0) {
                ++x;
                continue;
            }
            int end = x;
            while (end < w && r.holes(end, y) != 0) {
                ++end;
            }
            double backing = 0.0;
            if (x > 0) {
                backing = std::max(backing, r.depth(x - 1, y));
            }
            if (end < w) {
                backing = std::max(backing, r.depth(end, y));
            }
            if (backing == 0.0) {
                backing = far;
            }
            for (int k = x; k < end; ++k) {
                r.depth(k, y) = backing;
            }
            x = end;
        }
    }
    return r;
}

ViewSynthesis synthesize_view(const Image& img, const DepthMap& depth, const CameraPose& cam, const PatchParams& params)
{
    ViewSynthesis out{Image{}, reproject(img, depth, cam), false};
    if (count(out.warped.holes) == 0) {
        out.image = out.warped.image;
        return out;
    }
    const int w = img.width();
    const int h = img.height();
    TargetConstraint constraint{out.warped.depth, Grid<double>(w, h, 0.0)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (out.warped.holes(x, y) != 0) {
                // Small slack so targets on the backing layer itself qualify
                // despite rounding in ramp primitives.
                constraint.min_depth(x, y) = out.warped.depth(x, y) * (1.0 - 1e-9);
            }
        }
    }
    try {
        out.image = inpaint_exemplar(out.warped.image, out.warped.holes, params, nullptr, &constraint).image;
    } catch (const InfeasibleDomain&) {
        out.depth_restriction_dropped = true;
        out.image = inpaint_exemplar(out.warped.image, out.warped.holes, params).image;
    }
    return out;
}

namespace {

Image as_rgb(const Image& img)
{
    if (img.channels() >= 3) {
        return img;
    }
    Image out(img.width(), img.height(), 3, ColorSpace::SRGB);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = img.at(x, y, 0);
            }
        }
    }
    return out;
}

Image concat(const Image& a, const Image& b)
{
    const int w = a.width();
    Image out(2 * w, a.height(), a.channels(), a.color_space());
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < a.channels(); ++c) {
                out.at(x, y, c) = a.at(x, y, c);
                out.at(w + x, y, c) = b.at(x, y, c);
            }
        }
    }
    return out;
}

} // namespace

Image make_stereo_outputs(const Image& left, const Image& right, StereoMode mode)
{
    if (left.width() != right.width() || left.height() != right.height() || left.channels() != right.channels()) {
        throw InvalidInput("stereo output: left and right views differ in shape");
    }
    switch (mode) {
    case StereoMode::SideBySide:
        return concat(left, right);
    case StereoMode::Crossed:
        return concat(right, left);
    case StereoMode::Anaglyph: {
        const Image l = as_rgb(left);
        Image out = as_rgb(right);
        for (int y = 0; y < out.height(); ++y) {
            for (int x = 0; x < out.width(); ++x) {
                out.at(x, y, 0) = l.at(x, y, 0);
            }
        }
        return out;
    }
    }
    throw InvalidInput("stereo output: unknown mode");
}

StereoMode stereo_mode_from_name(const std::string& name)
{
    if (name == "side_by_side") {
        return StereoMode::SideBySide;
    }
    if (name == "crossed") {
        return StereoMode::Crossed;
    }
    if (name == "anaglyph") {
        return StereoMode::Anaglyph;
    }
    throw InvalidInput("unknown stereo output mode '" + name + "' (side_by_side, crossed, anaglyph)");
}

} // namespace vellum
