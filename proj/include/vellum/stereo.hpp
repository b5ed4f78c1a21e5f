#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vellum/exemplar.hpp"
#include "vellum/image.hpp"

namespace vellum {

/// Scene-relative depth, smaller = nearer, strictly positive.
using DepthMap = Grid<double>;

/// Constant depth, or a linear ramp through (x0, y0, z0) and (x1, y1, z1)
/// that is constant perpendicular to the segment joining them.
struct PlanePrimitive {
    double z0 = 1.0;
    std::optional<std::array<double, 5>> ramp; // x0, y0, x1, y1, z1
};

/// Hemisphere bulging towards the viewer: z0 - sqrt(r^2 - dist^2).
struct SpherePrimitive {
    double cx = 0.0, cy = 0.0, radius = 1.0, z0 = 1.0;
};

/// Half cylinder with its axis through (cx, cy) at `angle_deg` from the x
/// axis: z0 - sqrt(r^2 - dist_to_axis^2).
struct CylinderPrimitive {
    double cx = 0.0, cy = 0.0, radius = 1.0, angle_deg = 90.0, z0 = 1.0;
};

/// Cone with its apex (depth z_apex) towards the viewer and base depth z0
/// at distance r from (cx, cy).
struct ConePrimitive {
    double cx = 0.0, cy = 0.0, radius = 1.0, z_apex = 0.5, z0 = 1.0;
};

using Primitive = std::variant<PlanePrimitive, SpherePrimitive, CylinderPrimitive, ConePrimitive>;

struct LayerSpec {
    BinaryMask mask;
    Primitive primitive;
    std::string name;
};

/// Primitive depth at pixel (x, y); `clamped` is set when the pixel lies
/// outside the primitive's silhouette and the nearest valid depth was used.
double primitive_depth(const Primitive& prim, double x, double y, bool* clamped = nullptr);

struct ComposedDepth {
    DepthMap depth;
    /// Index of the layer that set each pixel, -1 for background.
    Grid<int> layer;
    std::vector<std::string> warnings;
};

/// Layers are listed back to front; the last layer covering a pixel wins.
/// Throws InvalidInput on mask size mismatch or non-positive depth.
ComposedDepth compose_depth(const std::vector<LayerSpec>& layers, int width, int height, double background_depth);

struct CameraPose {
    std::array<double, 3> position{0.0, 0.0, 0.0};
    std::array<double, 9> orientation{1, 0, 0, 0, 1, 0, 0, 0, 1}; // row-major
    double fov_deg = 40.0;
    /// Offset of the second eye; must lie along the x axis.
    std::array<double, 3> baseline{0.0, 0.0, 0.0};

    void validate() const;
    double focal_pixels(int width) const;
    /// Signed horizontal disparity in pixels of a point at depth z.
    double disparity(int width, double z) const;
};

struct Reprojection {
    Image image;
    BinaryMask holes;
    /// Depth of the rendered source per pixel; hole pixels hold the depth of
    /// the layer behind them (the farther of the nearest non-hole pixels on
    /// the same row).
    DepthMap depth;
};

/// Forward warp x -> round(x - disparity(z)) with a z-buffer (strictly
/// nearer wins, first in scan order on ties) and a 1-pixel splat.
Reprojection reproject(const Image& img, const DepthMap& depth, const CameraPose& cam);

struct ViewSynthesis {
    Image image;
    Reprojection warped;
    /// Set when no target patch satisfied the depth restriction and the
    /// holes were filled without it.
    bool depth_restriction_dropped = false;
};

/// Reprojects and fills the holes by exemplar inpainting, restricting NN
/// targets to pixels at least as deep as the hole's backing layer.
ViewSynthesis synthesize_view(const Image& img, const DepthMap& depth, const CameraPose& cam,
                              const PatchParams& params = {});

enum class StereoMode { SideBySide, Crossed, Anaglyph };

/// side_by_side = left|right, crossed = right|left, anaglyph = R of left
/// with G, B of right (gray inputs are expanded to RGB).
Image make_stereo_outputs(const Image& left, const Image& right, StereoMode mode);

StereoMode stereo_mode_from_name(const std::string& name);

} // namespace vellum
