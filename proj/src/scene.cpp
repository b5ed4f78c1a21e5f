#include "vellum/scene.hpp"

#include <string>

#include "vellum/io.hpp"
#include "vellum/keyvalue.hpp"

namespace vellum {
namespace {

std::vector<double> numbers(const KeyValueSection& s, std::string_view key, std::size_t n, const std::string& where)
{
    const auto v = s.get(key);
    if (!v) {
        throw InvalidInput(where + ": missing '" + std::string(key) + "'");
    }
    auto out = parse_numbers(*v, where + " " + std::string(key));
    if (out.size() != n) {
        throw InvalidInput(where + ": '" + std::string(key) + "' needs " + std::to_string(n) + " values");
    }
    return out;
}

double number(const KeyValueSection& s, std::string_view key, const std::string& where)
{
    return numbers(s, key, 1, where)[0];
}

BinaryMask parse_mask(std::string_view spec, int w, int h, const std::filesystem::path& base_dir, const std::string& where)
{
    BinaryMask m(w, h, 0);
    if (spec == "full") {
        for (auto& v : m.values()) {
            v = 1;
        }
        return m;
    }
    if (spec.starts_with("rect:")) {
        const auto r = parse_numbers(spec.substr(5), where + " mask");
        if (r.size() != 4) {
            throw InvalidInput(where + ": rect mask needs x,y,w,h");
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (x >= r[0] && x < r[0] + r[2] && y >= r[1] && y < r[1] + r[3]) {
                    m(x, y) = 1;
                }
            }
        }
        return m;
    }
    if (spec.starts_with("disc:")) {
        const auto d = parse_numbers(spec.substr(5), where + " mask");
        if (d.size() != 3) {
            throw InvalidInput(where + ": disc mask needs cx,cy,r");
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if ((x - d[0]) * (x - d[0]) + (y - d[1]) * (y - d[1]) <= d[2] * d[2]) {
                    m(x, y) = 1;
                }
            }
        }
        return m;
    }
    const Image img = io::load_image(base_dir / std::filesystem::path(std::string(spec)));
    if (img.width() != w || img.height() != h) {
        throw InvalidInput(where + ": mask file size differs from the image");
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                if (img.at(x, y, c) > 0.0) {
                    m(x, y) = 1;
                }
            }
        }
    }
    return m;
}

} // namespace

Scene parse_scene(std::string_view text, int width, int height, const std::filesystem::path& base_dir)
{
    const KeyValueDocument doc = parse_keyvalue(text);
    Scene scene;
    if (const auto bg = doc.root.get("background_depth")) {
        scene.background_depth = parse_number(*bg, "background_depth");
    }
    for (const KeyValueSection& s : doc.sections) {
        const std::string where = "scene line " + std::to_string(s.line);
        if (s.name != "layer") {
            throw InvalidInput(where + ": unknown section [" + s.name + "]");
        }
        LayerSpec layer;
        layer.name = s.get("name").value_or("");
        const auto mask = s.get("mask");
        if (!mask) {
            throw InvalidInput(where + ": layer without mask");
        }
        layer.mask = parse_mask(*mask, width, height, base_dir, where);
        const std::string kind = s.get("primitive").value_or("plane");
        if (kind == "plane") {
            PlanePrimitive p{number(s, "depth", where), std::nullopt};
            if (s.has("ramp")) {
                const auto r = numbers(s, "ramp", 5, where);
                p.ramp = std::array<double, 5>{r[0], r[1], r[2], r[3], r[4]};
            }
            layer.primitive = p;
        } else if (kind == "sphere") {
            const auto c = numbers(s, "center", 2, where);
            layer.primitive = SpherePrimitive{c[0], c[1], number(s, "radius", where), number(s, "depth", where)};
        } else if (kind == "cylinder") {
            const auto c = numbers(s, "center", 2, where);
            const double angle = s.has("angle") ? number(s, "angle", where) : 90.0;
            layer.primitive =
                CylinderPrimitive{c[0], c[1], number(s, "radius", where), angle, number(s, "depth", where)};
        } else if (kind == "cone") {
            const auto c = numbers(s, "center", 2, where);
            layer.primitive = ConePrimitive{c[0], c[1], number(s, "radius", where), number(s, "apex", where),
                                            number(s, "depth", where)};
        } else {
            throw InvalidInput(where + ": unknown primitive '" + kind + "'");
        }
        scene.layers.push_back(std::move(layer));
    }
    return scene;
}

Scene load_scene(const std::filesystem::path& path, int width, int height)
{
    const auto bytes = io::read_file(path);
    return parse_scene(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), width, height,
                       path.parent_path());
}

} // namespace vellum
