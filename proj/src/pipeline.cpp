#include "vellum/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vellum/io.hpp"
#include "vellum/keyvalue.hpp"
#include "vellum/manifest.hpp"
#include "vellum/osmosis.hpp"
#include "vellum/scene.hpp"

namespace vellum {
namespace fs = std::filesystem;

namespace {

// Re-raises module errors with the failing stage named, keeping the kind.
template <typename F>
auto stage(const char* name, F&& f)
{
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("stage '") + name + "': " + e.what());
    }
}

Image as_rgb(const Image& img)
{
    if (img.channels() == 3) {
        return img;
    }
    Image out(img.width(), img.height(), 3, ColorSpace::SRGB);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = img.at(x, y, std::min(c, img.channels() - 1));
            }
        }
    }
    return out;
}

Image crop_image(const Image& img, const CropRect& r)
{
    Image out(r.width, r.height, img.channels(), img.color_space());
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                out.at(x, y, c) = img.at(r.x + x, r.y + y, c);
            }
        }
    }
    return out;
}

CropRect effective_crop(const PipelineConfig& config, int w, int h)
{
    if (!config.crop) {
        return {0, 0, w, h};
    }
    const CropRect r = *config.crop;
    if (r.x < 0 || r.y < 0 || r.width < 1 || r.height < 1 || r.x + r.width > w || r.y + r.height > h) {
        throw InvalidInput("crop rectangle lies outside the image");
    }
    return r;
}

BinaryMask paste(const BinaryMask& part, const CropRect& r, int w, int h)
{
    BinaryMask out(w, h, 0);
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            out(r.x + x, r.y + y) = part(x, y);
        }
    }
    return out;
}

Image depth_preview(const DepthMap& depth)
{
    double lo = depth[0];
    double hi = depth[0];
    for (double z : depth.values()) {
        lo = std::min(lo, z);
        hi = std::max(hi, z);
    }
    Grid<double> g(depth.width(), depth.height(), 1.0);
    if (hi > lo) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] = (hi - depth[i]) / (hi - lo); // near = bright
        }
    }
    return image_from_grid(g);
}

Image mask_preview(const BinaryMask& m)
{
    Grid<double> g(m.width(), m.height(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = m[i] != 0 ? 1.0 : 0.0;
    }
    return image_from_grid(g);
}

void check_bit_depth(int bits)
{
    if (bits != 8 && bits != 16) {
        throw InvalidInput("bit depth must be 8 or 16");
    }
}

} // namespace

void PipelineConfig::validate() const
{
    chan_vese.validate();
    if (kmeans.k < 2 || kmeans.restarts < 1 || kmeans.max_iter < 1) {
        throw InvalidInput("kmeans: k >= 2, restarts >= 1 and max_iter >= 1 required");
    }
    if (!(min_overlap >= 0.0 && min_overlap <= 1.0) || min_area < 0 || closing_radius < 0) {
        throw InvalidInput("refine: invalid parameters");
    }
    tv.validate();
    exemplar.validate();
    check_bit_depth(bit_depth);
}

PipelineConfig parse_config(std::string_view text)
{
    const KeyValueDocument doc = parse_keyvalue(text);
    if (!doc.root.entries.empty()) {
        throw InvalidInput("config: key '" + doc.root.entries.front().first + "' outside any section");
    }
    PipelineConfig c;
    for (const KeyValueSection& s : doc.sections) {
        for (const auto& [key, value] : s.entries) {
            const std::string what = s.name + "." + key;
            auto num = [&] { return parse_number(value, what); };
            auto integer = [&] { return static_cast<int>(parse_integer(value, what)); };
            bool known = true;
            if (s.name == "chan_vese") {
                if (key == "mu") c.chan_vese.mu = num();
                else if (key == "nu") c.chan_vese.nu = num();
                else if (key == "lambda1") c.chan_vese.lambda1 = num();
                else if (key == "lambda2") c.chan_vese.lambda2 = num();
                else if (key == "max_iter") c.chan_vese.max_iter = integer();
                else if (key == "tol") c.chan_vese.tol = num();
                else if (key == "seed_radius") c.chan_vese.seed_radius = integer();
                else known = false;
            } else if (s.name == "kmeans") {
                if (key == "k") c.kmeans.k = integer();
                else if (key == "restarts") c.kmeans.restarts = integer();
                else if (key == "seed") c.kmeans.seed = parse_unsigned(value, what);
                else if (key == "max_iter") c.kmeans.max_iter = integer();
                else known = false;
            } else if (s.name == "refine") {
                if (key == "min_overlap") c.min_overlap = num();
                else if (key == "min_area") c.min_area = integer();
                else if (key == "closing_radius") c.closing_radius = integer();
                else known = false;
            } else if (s.name == "tv") {
                if (key == "lambda") c.tv.lambda = num();
                else if (key == "max_iter") c.tv.max_iter = integer();
                else if (key == "tol") c.tv.tol = num();
                else known = false;
            } else if (s.name == "exemplar") {
                if (key == "patch_side") c.exemplar.patch_side = integer();
                else if (key == "propagation_iters") c.exemplar.propagation_iters = integer();
                else if (key == "search_samples") c.exemplar.search_samples = integer();
                else if (key == "scales") c.exemplar.scales = integer();
                else if (key == "seed") c.exemplar.seed = parse_unsigned(value, what);
                else if (key == "max_outer") c.exemplar.max_outer = integer();
                else if (key == "change_threshold") c.exemplar.change_threshold = num();
                else known = false;
            } else if (s.name == "crop") {
                CropRect r = c.crop.value_or(CropRect{});
                if (key == "x") r.x = integer();
                else if (key == "y") r.y = integer();
                else if (key == "width") r.width = integer();
                else if (key == "height") r.height = integer();
                else known = false;
                c.crop = r;
            } else if (s.name == "output") {
                if (key == "bit_depth") c.bit_depth = integer();
                else known = false;
            } else {
                throw InvalidInput("config line " + std::to_string(s.line) + ": unknown section [" + s.name + "]");
            }
            if (!known) {
                throw InvalidInput("config: unknown key '" + what + "'");
            }
        }
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const fs::path& path)
{
    const auto bytes = io::read_file(path);
    return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

SegmentResult segment_from_training(const Image& img, const BinaryMask& training, const PipelineConfig& config)
{
    config.validate();
    if (!training.same_shape(img.width(), img.height())) {
        throw InvalidInput("segment: training mask and image dimensions differ");
    }
    SegmentResult r;
    r.training = training;
    const FeatureImage features = stage("features", [&] { return compute_features(as_rgb(img)); });
    LabelResult labels = stage("labels", [&] { return kmeans_label(features, config.kmeans); });
    r.labels = std::move(labels.labels);
    r.warnings = std::move(labels.warnings);
    r.domain = stage("domain", [&] {
        BinaryMask d = propagate_training_labels(r.labels, training, config.min_overlap);
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] = static_cast<std::uint8_t>(d[i] != 0 || training[i] != 0);
        }
        return refine_mask(d, config.min_area, config.closing_radius);
    });
    return r;
}

SegmentResult segment_damage(const Image& img, std::span<const Pixel> seeds, const PipelineConfig& config)
{
    config.validate();
    const int w = img.width();
    const int h = img.height();
    const CropRect crop = effective_crop(config, w, h);
    const Image sub = crop_image(img, crop);
    std::vector<Pixel> local;
    for (const Pixel& p : seeds) {
        if (p.x < crop.x || p.y < crop.y || p.x >= crop.x + crop.width || p.y >= crop.y + crop.height) {
            throw InvalidInput("seed (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") lies outside the crop");
        }
        local.push_back({p.x - crop.x, p.y - crop.y});
    }
    const ChanVeseResult cv = stage("D1", [&] { return chan_vese_segment(sub, local, config.chan_vese); });
    SegmentResult r = segment_from_training(sub, cv.region, config);
    r.c1 = cv.c1;
    r.c2 = cv.c2;
    if (config.crop) {
        r.training = paste(r.training, crop, w, h);
        r.domain = paste(r.domain, crop, w, h);
        r.warnings.push_back("label map covers the crop " + std::to_string(crop.width) + "x"
                             + std::to_string(crop.height) + "+" + std::to_string(crop.x) + "+"
                             + std::to_string(crop.y) + " only");
    }
    return r;
}

fs::path run_segment(const SegmentCommand& cmd, const fs::path& out_dir)
{
    const Image img = io::load_image(cmd.image);
    const SegmentResult r = segment_damage(img, cmd.seeds, cmd.config);
    io::save_annotation(annotation_from_mask(r.training, Label::Training), out_dir / "d1.png");
    io::write_file(out_dir / "labels.png", io::encode_label_png(r.labels.ids));
    io::save_annotation(annotation_from_mask(r.domain, Label::Inpaint), out_dir / "domain.png");
    return write_manifest(out_dir, "segment", to_json(cmd), {{"image", cmd.image}}, {"d1.png", "labels.png", "domain.png"},
                          r.warnings);
}

fs::path run_tv(const TvCommand& cmd, const fs::path& out_dir)
{
    check_bit_depth(cmd.bit_depth);
    const Image img = io::load_image(cmd.image);
    const BinaryMask domain = domain_of(io::load_annotation(cmd.mask, img.width(), img.height()));
    const TvResult r = stage("tv", [&] { return tv_inpaint(img, domain, cmd.tv); });
    io::save_png(r.image, out_dir / "tv.png", cmd.bit_depth);
    return write_manifest(out_dir, "tv-inpaint", to_json(cmd), {{"image", cmd.image}, {"mask", cmd.mask}}, {"tv.png"});
}

fs::path run_inpaint(const InpaintCommand& cmd, const fs::path& out_dir)
{
    check_bit_depth(cmd.bit_depth);
    const Image img = io::load_image(cmd.image);
    const BinaryMask domain = domain_of(io::load_annotation(cmd.mask, img.width(), img.height()));
    std::map<std::string, fs::path> inputs{{"image", cmd.image}, {"mask", cmd.mask}};
    std::optional<Image> init;
    if (cmd.init) {
        init = io::load_image(*cmd.init);
        if (init->channels() != img.channels()) {
            init = img.channels() == 3 ? as_rgb(*init) : to_gray(*init);
        }
        inputs["init"] = *cmd.init;
    }
    const ExemplarResult r = stage("exemplar", [&] {
        return inpaint_exemplar(img, domain, cmd.patch, init ? &*init : nullptr, nullptr, cmd.tv);
    });
    io::save_png(r.image, out_dir / "inpainted.png", cmd.bit_depth);
    return write_manifest(out_dir, "inpaint", to_json(cmd), inputs, {"inpainted.png"});
}

fs::path run_restore(const RestoreCommand& cmd, const fs::path& out_dir)
{
    cmd.config.validate();
    if (cmd.seeds.empty() == !cmd.mask.has_value()) {
        throw InvalidInput("restore: give either seeds or a mask, not both or neither");
    }
    const int bits = cmd.config.bit_depth;
    const Image img = io::load_image(cmd.image);
    std::map<std::string, fs::path> inputs{{"image", cmd.image}};
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
    BinaryMask domain;
    if (cmd.mask) {
        inputs["mask"] = *cmd.mask;
        domain = domain_of(io::load_annotation(*cmd.mask, img.width(), img.height()));
    } else {
        SegmentResult s = segment_damage(img, cmd.seeds, cmd.config);
        io::save_annotation(annotation_from_mask(s.training, Label::Training), out_dir / "d1.png");
        io::write_file(out_dir / "labels.png", io::encode_label_png(s.labels.ids));
        outputs = {"d1.png", "labels.png"};
        warnings = std::move(s.warnings);
        domain = std::move(s.domain);
    }
    io::save_annotation(annotation_from_mask(domain, Label::Inpaint), out_dir / "domain.png");
    outputs.push_back("domain.png");

    Image final_image = img;
    if (count(domain) > 0) {
        const TvResult tv = stage("tv", [&] { return tv_inpaint(img, domain, cmd.config.tv); });
        io::save_png(tv.image, out_dir / "tv_init.png", bits);
        final_image = stage("exemplar", [&] {
            return inpaint_exemplar(img, domain, cmd.config.exemplar, &tv.image, nullptr, cmd.config.tv).image;
        });
    } else {
        io::save_png(img, out_dir / "tv_init.png", bits);
        warnings.push_back("inpainting domain is empty; image passed through");
    }
    outputs.push_back("tv_init.png");
    io::save_png(final_image, out_dir / "final.png", bits);
    outputs.push_back("final.png");
    return write_manifest(out_dir, "restore", to_json(cmd), inputs, outputs, warnings);
}

fs::path run_osmosis(const OsmosisCommand& cmd, const fs::path& out_dir)
{
    check_bit_depth(cmd.bit_depth);
    const Image rgb = io::load_image(cmd.rgb);
    const Image ir = io::load_image(cmd.infrared);
    if (ir.width() != rgb.width() || ir.height() != rgb.height()) {
        throw InvalidInput("osmosis: infrared image size differs from the RGB image");
    }
    const AnnotationMask ann = io::load_annotation(cmd.mask, rgb.width(), rgb.height());
    const Image out = stage("osmosis", [&] { return osmosis_restore(rgb, ir, ann); });
    io::save_png(out, out_dir / "osmosis.png", cmd.bit_depth);
    return write_manifest(out_dir, "osmosis", to_json(cmd),
                          {{"rgb", cmd.rgb}, {"infrared", cmd.infrared}, {"mask", cmd.mask}}, {"osmosis.png"});
}

double default_baseline(const DepthMap& depth)
{
    double lo = depth[0];
    double hi = depth[0];
    for (double z : depth.values()) {
        lo = std::min(lo, z);
        hi = std::max(hi, z);
    }
    return 0.02 * (hi > lo ? hi - lo : hi);
}

fs::path run_stereo(const StereoCommand& cmd, const fs::path& out_dir)
{
    check_bit_depth(cmd.bit_depth);
    const Image img = io::load_image(cmd.image);
    const Scene scene = load_scene(cmd.scene, img.width(), img.height());
    const ComposedDepth depth = stage("depth", [&] {
        return compose_depth(scene.layers, img.width(), img.height(), scene.background_depth.value_or(cmd.background_depth));
    });
    CameraPose cam;
    cam.fov_deg = cmd.fov_deg;
    cam.baseline = {cmd.baseline.value_or(default_baseline(depth.depth)), 0.0, 0.0};
    const ViewSynthesis view = stage("stereo", [&] { return synthesize_view(img, depth.depth, cam, cmd.patch); });
    std::vector<std::string> warnings = depth.warnings;
    if (view.depth_restriction_dropped) {
        warnings.push_back("no target patch behind the disocclusions; filled without the depth restriction");
    }
    io::save_png(depth_preview(depth.depth), out_dir / "depth.png", cmd.bit_depth);
    io::save_png(mask_preview(view.warped.holes), out_dir / "holes.png", 8);
    io::save_png(view.image, out_dir / "right.png", cmd.bit_depth);
    io::save_png(make_stereo_outputs(img, view.image, cmd.mode), out_dir / "stereo.png", cmd.bit_depth);
    return write_manifest(out_dir, "stereo", to_json(cmd), {{"image", cmd.image}, {"scene", cmd.scene}},
                          {"depth.png", "holes.png", "right.png", "stereo.png"}, warnings);
}

} // namespace vellum
