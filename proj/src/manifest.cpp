#include "vellum/manifest.hpp"

#include <string>

#include "vellum/io.hpp"

namespace vellum {
namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "vellum-manifest/1";

std::string abs_path(const fs::path& p)
{
    return fs::absolute(p).lexically_normal().string();
}

Json seeds_json(const std::vector<Pixel>& seeds)
{
    Json a = Json::array();
    for (const Pixel& p : seeds) {
        a.push_back({p.x, p.y});
    }
    return a;
}

std::vector<Pixel> seeds_from(const Json& j)
{
    std::vector<Pixel> out;
    for (const auto& p : j) {
        out.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    }
    return out;
}

Json to_json(const TvParams& t)
{
    return {{"lambda", t.lambda}, {"max_iter", t.max_iter}, {"tol", t.tol}};
}

TvParams tv_from(const Json& j)
{
    TvParams t;
    t.lambda = j.at("lambda").get<double>();
    t.max_iter = j.at("max_iter").get<int>();
    t.tol = j.at("tol").get<double>();
    return t;
}

Json to_json(const PatchParams& p)
{
    return {{"patch_side", p.patch_side}, {"propagation_iters", p.propagation_iters},
            {"search_samples", p.search_samples}, {"scales", p.scales},
            {"seed", p.seed},             {"max_outer", p.max_outer},                 {"change_threshold", p.change_threshold}};
}

PatchParams patch_from(const Json& j)
{
    PatchParams p;
    p.patch_side = j.at("patch_side").get<int>();
    p.propagation_iters = j.at("propagation_iters").get<int>();
    p.search_samples = j.at("search_samples").get<int>();
    p.scales = j.at("scales").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.max_outer = j.at("max_outer").get<int>();
    p.change_threshold = j.at("change_threshold").get<double>();
    return p;
}

const char* mode_name(StereoMode m)
{
    switch (m) {
    case StereoMode::SideBySide: return "side_by_side";
    case StereoMode::Crossed: return "crossed";
    case StereoMode::Anaglyph: return "anaglyph";
    }
    return "side_by_side";
}

std::string file_hash(const fs::path& p)
{
    return io::sha256_hex(io::read_file(p));
}

} // namespace

Json to_json(const PipelineConfig& c)
{
    Json j;
    j["chan_vese"] = {{"mu", c.chan_vese.mu},           {"nu", c.chan_vese.nu},
                      {"lambda1", c.chan_vese.lambda1}, {"lambda2", c.chan_vese.lambda2},
                      {"max_iter", c.chan_vese.max_iter}, {"tol", c.chan_vese.tol},
                      {"seed_radius", c.chan_vese.seed_radius}};
    j["kmeans"] = {{"k", c.kmeans.k}, {"restarts", c.kmeans.restarts}, {"seed", c.kmeans.seed},
                   {"max_iter", c.kmeans.max_iter}};
    j["refine"] = {{"min_overlap", c.min_overlap}, {"min_area", c.min_area}, {"closing_radius", c.closing_radius}};
    j["tv"] = to_json(c.tv);
    j["exemplar"] = to_json(c.exemplar);
    j["crop"] = c.crop ? Json{{"x", c.crop->x}, {"y", c.crop->y}, {"width", c.crop->width}, {"height", c.crop->height}}
                       : Json(nullptr);
    j["bit_depth"] = c.bit_depth;
    return j;
}

PipelineConfig config_from_json(const Json& j)
{
    PipelineConfig c;
    const Json& cv = j.at("chan_vese");
    c.chan_vese.mu = cv.at("mu").get<double>();
    c.chan_vese.nu = cv.at("nu").get<double>();
    c.chan_vese.lambda1 = cv.at("lambda1").get<double>();
    c.chan_vese.lambda2 = cv.at("lambda2").get<double>();
    c.chan_vese.max_iter = cv.at("max_iter").get<int>();
    c.chan_vese.tol = cv.at("tol").get<double>();
    c.chan_vese.seed_radius = cv.at("seed_radius").get<int>();
    const Json& km = j.at("kmeans");
    c.kmeans.k = km.at("k").get<int>();
    c.kmeans.restarts = km.at("restarts").get<int>();
    c.kmeans.seed = km.at("seed").get<std::uint64_t>();
    c.kmeans.max_iter = km.at("max_iter").get<int>();
    const Json& rf = j.at("refine");
    c.min_overlap = rf.at("min_overlap").get<double>();
    c.min_area = rf.at("min_area").get<int>();
    c.closing_radius = rf.at("closing_radius").get<int>();
    c.tv = tv_from(j.at("tv"));
    c.exemplar = patch_from(j.at("exemplar"));
    if (const Json& cr = j.at("crop"); !cr.is_null()) {
        c.crop = CropRect{cr.at("x").get<int>(), cr.at("y").get<int>(), cr.at("width").get<int>(),
                          cr.at("height").get<int>()};
    }
    c.bit_depth = j.at("bit_depth").get<int>();
    c.validate();
    return c;
}

Json to_json(const SegmentCommand& c)
{
    return {{"image", abs_path(c.image)}, {"seeds", seeds_json(c.seeds)}, {"config", to_json(c.config)}};
}

Json to_json(const TvCommand& c)
{
    return {{"image", abs_path(c.image)}, {"mask", abs_path(c.mask)}, {"tv", to_json(c.tv)}, {"bit_depth", c.bit_depth}};
}

Json to_json(const InpaintCommand& c)
{
    return {{"image", abs_path(c.image)},
            {"mask", abs_path(c.mask)},
            {"patch", to_json(c.patch)},
            {"tv", to_json(c.tv)},
            {"init", c.init ? Json(abs_path(*c.init)) : Json(nullptr)},
            {"bit_depth", c.bit_depth}};
}

Json to_json(const RestoreCommand& c)
{
    return {{"image", abs_path(c.image)},
            {"seeds", seeds_json(c.seeds)},
            {"mask", c.mask ? Json(abs_path(*c.mask)) : Json(nullptr)},
            {"config", to_json(c.config)}};
}

Json to_json(const OsmosisCommand& c)
{
    return {{"rgb", abs_path(c.rgb)}, {"infrared", abs_path(c.infrared)}, {"mask", abs_path(c.mask)},
            {"bit_depth", c.bit_depth}};
}

Json to_json(const StereoCommand& c)
{
    return {{"image", abs_path(c.image)},
            {"scene", abs_path(c.scene)},
            {"baseline", c.baseline ? Json(*c.baseline) : Json(nullptr)},
            {"fov_deg", c.fov_deg},
            {"mode", mode_name(c.mode)},
            {"background_depth", c.background_depth},
            {"patch", to_json(c.patch)},
            {"bit_depth", c.bit_depth}};
}

fs::path write_manifest(const fs::path& out_dir, const std::string& command, const Json& params,
                        const std::map<std::string, fs::path>& inputs, const std::vector<std::string>& outputs,
                        const std::vector<std::string>& warnings)
{
    Json m;
    m["format"] = kFormat;
    m["command"] = command;
    m["params"] = params;
    Json in = Json::object();
    for (const auto& [name, path] : inputs) {
        in[name] = {{"path", abs_path(path)}, {"sha256", file_hash(path)}};
    }
    m["inputs"] = in;
    Json out = Json::object();
    for (const std::string& name : outputs) {
        out[name] = file_hash(out_dir / name);
    }
    m["outputs"] = out;
    m["warnings"] = warnings;
    const std::string text = m.dump(2) + "\n";
    const fs::path path = out_dir / "manifest.json";
    io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    return path;
}

ReplayReport replay_manifest(const fs::path& manifest, const fs::path& out_dir)
{
    const auto bytes = io::read_file(manifest);
    Json m;
    try {
        m = Json::parse(bytes.begin(), bytes.end());
    } catch (const Json::exception& e) {
        throw InvalidInput("manifest " + manifest.string() + " is not valid JSON: " + e.what());
    }
    if (m.value("format", "") != kFormat) {
        throw InvalidInput("manifest " + manifest.string() + " has an unknown format");
    }
    for (const auto& [name, rec] : m.at("inputs").items()) {
        const fs::path p = rec.at("path").get<std::string>();
        if (file_hash(p) != rec.at("sha256").get<std::string>()) {
            throw InvalidInput("input '" + name + "' (" + p.string() + ") changed since the manifest was written");
        }
    }
    const std::string command = m.at("command").get<std::string>();
    const Json& p = m.at("params");
    auto opt_path = [](const Json& j) { return j.is_null() ? std::nullopt : std::optional<fs::path>(j.get<std::string>()); };
    try {
        if (command == "segment") {
            run_segment({p.at("image").get<std::string>(), seeds_from(p.at("seeds")), config_from_json(p.at("config"))},
                        out_dir);
        } else if (command == "tv-inpaint") {
            run_tv({p.at("image").get<std::string>(), p.at("mask").get<std::string>(), tv_from(p.at("tv")),
                    p.at("bit_depth").get<int>()},
                   out_dir);
        } else if (command == "inpaint") {
            run_inpaint({p.at("image").get<std::string>(), p.at("mask").get<std::string>(), patch_from(p.at("patch")),
                         tv_from(p.at("tv")), opt_path(p.at("init")), p.at("bit_depth").get<int>()},
                        out_dir);
        } else if (command == "restore") {
            run_restore({p.at("image").get<std::string>(), seeds_from(p.at("seeds")), opt_path(p.at("mask")),
                         config_from_json(p.at("config"))},
                        out_dir);
        } else if (command == "osmosis") {
            run_osmosis({p.at("rgb").get<std::string>(), p.at("infrared").get<std::string>(),
                         p.at("mask").get<std::string>(), p.at("bit_depth").get<int>()},
                        out_dir);
        } else if (command == "stereo") {
            StereoCommand c;
            c.image = p.at("image").get<std::string>();
            c.scene = p.at("scene").get<std::string>();
            if (!p.at("baseline").is_null()) {
                c.baseline = p.at("baseline").get<double>();
            }
            c.fov_deg = p.at("fov_deg").get<double>();
            c.mode = stereo_mode_from_name(p.at("mode").get<std::string>());
            c.background_depth = p.at("background_depth").get<double>();
            c.patch = patch_from(p.at("patch"));
            c.bit_depth = p.at("bit_depth").get<int>();
            run_stereo(c, out_dir);
        } else {
            throw InvalidInput("manifest command '" + command + "' cannot be replayed");
        }
    } catch (const Json::exception& e) {
        throw InvalidInput("manifest " + manifest.string() + " is incomplete: " + e.what());
    }

    ReplayReport report{out_dir / "manifest.json", {}, {}};
    for (const auto& [name, hash] : m.at("outputs").items()) {
        const fs::path produced = out_dir / name;
        const bool same = fs::exists(produced) && file_hash(produced) == hash.get<std::string>();
        (same ? report.matched : report.mismatched).push_back(name);
    }
    return report;
}

} // namespace vellum
