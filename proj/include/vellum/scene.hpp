#pragma once

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "vellum/stereo.hpp"

namespace vellum {

/// Declarative layered scene:
///
///   background_depth = 10
///   [layer]
///   name = card
///   mask = rect:20,16,24,32        # x,y,w,h | disc:cx,cy,r | full | file.png
///   primitive = plane              # plane | sphere | cylinder | cone
///   depth = 5                      # z0; base depth for curved primitives
///   ramp = 0,0,63,0,7              # plane only: x0,y0,x1,y1,z1
///   center = 32,32                 # sphere / cylinder / cone
///   radius = 12
///   angle = 90                     # cylinder axis, degrees from x
///   apex = 4                       # cone apex depth
///
/// Layers are listed back to front. Mask files are resolved relative to
/// `base_dir`; any nonzero pixel is inside.
struct Scene {
    std::optional<double> background_depth;
    std::vector<LayerSpec> layers;
};

Scene parse_scene(std::string_view text, int width, int height, const std::filesystem::path& base_dir = {});
Scene load_scene(const std::filesystem::path& path, int width, int height);

} // namespace vellum
