// vellum: command-line front end. Exit codes: 0 success, 1 algorithmic
// failure, 2 usage or I/O error.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vellum/http_api.hpp"
#include "vellum/keyvalue.hpp"
#include "vellum/manifest.hpp"
#include "vellum/pipeline.hpp"

namespace fs = std::filesystem;
using namespace vellum;

namespace {

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::DegenerateResult:
    case ErrorKind::InfeasibleDomain:
    case ErrorKind::NumericalFailure:
    case ErrorKind::IllPosed:
        return 1;
    default:
        return 2;
    }
}

std::vector<Pixel> parse_seeds(const std::vector<std::string>& specs)
{
    std::vector<Pixel> out;
    for (const std::string& s : specs) {
        const auto v = parse_numbers(s, "--seed-px");
        if (v.size() != 2 || v[0] != static_cast<int>(v[0]) || v[1] != static_cast<int>(v[1])) {
            throw InvalidInput("--seed-px expects integer x,y, got '" + s + "'");
        }
        out.push_back({static_cast<int>(v[0]), static_cast<int>(v[1])});
    }
    return out;
}

void report(const fs::path& manifest)
{
    std::cout << "manifest: " << manifest.string() << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"vellum: manuscript restoration toolkit"};
    app.require_subcommand(1);

    fs::path out_dir;
    fs::path config_path;
    std::vector<std::string> seed_specs;
    const auto add_out = [&](CLI::App* sub) {
        sub->add_option("--out", out_dir, "Output directory")->required();
    };
    const auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Key-value config file")->check(CLI::ExistingFile);
    };
    auto config = [&] { return config_path.empty() ? PipelineConfig{} : load_config(config_path); };

    // segment
    SegmentCommand seg;
    auto* segment = app.add_subcommand("segment", "Detect the inpainting domain from seed pixels");
    segment->add_option("--image", seg.image, "Input image")->required()->check(CLI::ExistingFile);
    segment->add_option("--seed-px", seed_specs, "Seed pixel x,y (repeatable)")->required();
    add_config(segment);
    add_out(segment);

    // tv-inpaint
    TvCommand tv;
    auto* tv_cmd = app.add_subcommand("tv-inpaint", "Total-variation inpainting");
    tv_cmd->add_option("--image", tv.image, "Input image")->required()->check(CLI::ExistingFile);
    tv_cmd->add_option("--mask", tv.mask, "Annotation PNG")->required()->check(CLI::ExistingFile);
    tv_cmd->add_option("--lambda", tv.tv.lambda, "Fidelity weight")->capture_default_str();
    tv_cmd->add_option("--max-iter", tv.tv.max_iter, "Iteration cap")->capture_default_str();
    tv_cmd->add_option("--tol", tv.tv.tol, "Relative-change stop")->capture_default_str();
    tv_cmd->add_option("--bit-depth", tv.bit_depth, "Output sample depth (8 or 16)")->capture_default_str();
    add_out(tv_cmd);

    // inpaint
    InpaintCommand inp;
    std::string init_mode = "from-tv";
    fs::path init_file;
    auto* inpaint = app.add_subcommand("inpaint", "Exemplar inpainting");
    inpaint->add_option("--image", inp.image, "Input image")->required()->check(CLI::ExistingFile);
    inpaint->add_option("--mask", inp.mask, "Annotation PNG")->required()->check(CLI::ExistingFile);
    inpaint->add_option("--patch-side", inp.patch.patch_side, "Odd patch side")->capture_default_str();
    inpaint->add_option("--iters", inp.patch.propagation_iters, "PatchMatch iterations")->capture_default_str();
    inpaint->add_option("--scales", inp.patch.scales, "Pyramid levels")->capture_default_str();
    inpaint->add_option("--seed", inp.patch.seed, "Random seed")->capture_default_str();
    inpaint->add_option("--init", init_mode, "from-tv | from-file")->check(CLI::IsMember({"from-tv", "from-file"}));
    inpaint->add_option("--init-file", init_file, "Initial image for --init from-file")->check(CLI::ExistingFile);
    inpaint->add_option("--lambda", inp.tv.lambda, "TV fidelity weight for the initialisation")->capture_default_str();
    inpaint->add_option("--bit-depth", inp.bit_depth, "Output sample depth (8 or 16)")->capture_default_str();
    add_out(inpaint);

    // restore
    RestoreCommand rest;
    fs::path rest_mask;
    auto* restore = app.add_subcommand("restore", "Segment (or take a mask), TV-initialise, exemplar-inpaint");
    restore->add_option("--image", rest.image, "Input image")->required()->check(CLI::ExistingFile);
    auto* rest_seed_opt = restore->add_option("--seed-px", seed_specs, "Seed pixel x,y (repeatable)");
    auto* rest_mask_opt = restore->add_option("--mask", rest_mask, "Precomputed annotation PNG")->check(CLI::ExistingFile);
    rest_seed_opt->excludes(rest_mask_opt);
    add_config(restore);
    add_out(restore);

    // osmosis
    OsmosisCommand osm;
    auto* osmosis = app.add_subcommand("osmosis", "Infrared-guided osmosis restoration");
    osmosis->add_option("--rgb", osm.rgb, "Visible image")->required()->check(CLI::ExistingFile);
    osmosis->add_option("--ir", osm.infrared, "Infrared (or sketch) image")->required()->check(CLI::ExistingFile);
    osmosis->add_option("--mask", osm.mask, "Annotation PNG")->required()->check(CLI::ExistingFile);
    osmosis->add_option("--bit-depth", osm.bit_depth, "Output sample depth (8 or 16)")->capture_default_str();
    add_out(osmosis);

    // stereo
    StereoCommand st;
    std::optional<double> baseline;
    std::string mode = "side_by_side";
    auto* stereo = app.add_subcommand("stereo", "Synthesize a stereo pair from a layered scene");
    stereo->add_option("--image", st.image, "Input image (left view)")->required()->check(CLI::ExistingFile);
    stereo->add_option("--scene", st.scene, "Scene file")->required()->check(CLI::ExistingFile);
    stereo->add_option("--baseline", baseline, "Eye offset in depth units (default 2% of depth range)");
    stereo->add_option("--fov", st.fov_deg, "Horizontal field of view in degrees")->capture_default_str();
    stereo->add_option("--output-mode", mode, "side_by_side | crossed | anaglyph")
        ->check(CLI::IsMember({"side_by_side", "crossed", "anaglyph"}));
    stereo->add_option("--background-depth", st.background_depth, "Depth where no layer covers")->capture_default_str();
    stereo->add_option("--patch-side", st.patch.patch_side, "Odd patch side for hole filling")->capture_default_str();
    stereo->add_option("--seed", st.patch.seed, "Random seed")->capture_default_str();
    stereo->add_option("--bit-depth", st.bit_depth, "Output sample depth (8 or 16)")->capture_default_str();
    add_out(stereo);

    // replay
    fs::path manifest_path;
    auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare outputs byte for byte");
    replay->add_option("manifest", manifest_path, "manifest.json")->required()->check(CLI::ExistingFile);
    add_out(replay);

    // serve
    std::string host = "127.0.0.1";
    int port = 8080;
    fs::path store = "vellum-store";
    int workers = 2;
    auto* serve_cmd = app.add_subcommand("serve", "Run the annotation HTTP service");
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--port", port)->capture_default_str();
    serve_cmd->add_option("--store", store, "Session store directory")->capture_default_str();
    serve_cmd->add_option("--workers", workers, "Compute worker threads")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (segment->parsed()) {
            seg.seeds = parse_seeds(seed_specs);
            seg.config = config();
            report(run_segment(seg, out_dir));
        } else if (tv_cmd->parsed()) {
            report(run_tv(tv, out_dir));
        } else if (inpaint->parsed()) {
            if (init_mode == "from-file") {
                if (init_file.empty()) {
                    throw InvalidInput("--init from-file needs --init-file");
                }
                inp.init = init_file;
            }
            report(run_inpaint(inp, out_dir));
        } else if (restore->parsed()) {
            rest.seeds = parse_seeds(seed_specs);
            if (!rest_mask.empty()) {
                rest.mask = rest_mask;
            }
            rest.config = config();
            report(run_restore(rest, out_dir));
        } else if (osmosis->parsed()) {
            report(run_osmosis(osm, out_dir));
        } else if (stereo->parsed()) {
            st.baseline = baseline;
            st.mode = stereo_mode_from_name(mode);
            report(run_stereo(st, out_dir));
        } else if (replay->parsed()) {
            const ReplayReport r = replay_manifest(manifest_path, out_dir);
            for (const auto& name : r.matched) {
                std::cout << "identical  " << name << "\n";
            }
            for (const auto& name : r.mismatched) {
                std::cout << "DIFFERENT  " << name << "\n";
            }
            return r.ok() ? 0 : 1;
        } else if (serve_cmd->parsed()) {
            return serve(host, port, ServiceOptions{store, workers});
        }
    } catch (const Error& e) {
        std::cerr << "vellum: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "vellum: io: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "vellum: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
