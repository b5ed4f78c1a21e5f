#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "vellum/io.hpp"
#include "vellum/manifest.hpp"
#include "vellum/osmosis.hpp"
#include "vellum/pipeline.hpp"
#include "vellum/scene.hpp"

using namespace vellum;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> bytes_of(const fs::path& p)
{
    return io::read_file(p);
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

std::string read_text(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code = -1;
    std::string err;
};

Run cli(const std::string& args, const fs::path& dir)
{
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(VELLUM_CLI_PATH) + " " + args + " >/dev/null 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(err)};
}

// Periodic texture with mild noise and a saturated damage blob.
struct Damaged {
    Image truth;
    Image image;
    BinaryMask damage;
};

Damaged damaged_texture(int w, int h, std::uint64_t seed)
{
    Damaged d;
    d.truth = testing::periodic_texture(w, h, 8, seed);
    std::mt19937_64 rng(seed + 100);
    for (auto& v : d.truth.data()) {
        v += testing::uniform(rng, -0.02, 0.02);
    }
    d.damage = testing::disc_mask(w, h, w / 2 - 2, h / 2 + 1, 7);
    d.image = d.truth;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (d.damage(x, y)) {
                d.image.at(x, y, 0) = 0.95;
                d.image.at(x, y, 1) = 0.95;
                d.image.at(x, y, 2) = 0.1;
            }
        }
    }
    return d;
}

} // namespace

TEST_CASE("config defaults and parsing")
{
    const PipelineConfig def = parse_config("");
    CHECK(def.kmeans.k == 35);
    CHECK(def.kmeans.restarts == 5);
    CHECK(def.tv.lambda == 1000.0);
    CHECK(def.exemplar.propagation_iters == 12);
    CHECK(def.exemplar.patch_side == 7);
    CHECK_FALSE(def.crop.has_value());

    const PipelineConfig c = parse_config(R"(
# restoration settings
[kmeans]
k = 8
seed = 42
[tv]
lambda = 500
[exemplar]
patch_side = 9
search_samples = 2
[crop]
x = 4
y = 5
width = 30
height = 20
[output]
bit_depth = 8
)");
    CHECK(c.kmeans.k == 8);
    CHECK(c.kmeans.seed == 42);
    CHECK(c.tv.lambda == 500.0);
    CHECK(c.exemplar.patch_side == 9);
    CHECK(c.exemplar.search_samples == 2);
    REQUIRE(c.crop.has_value());
    CHECK(*c.crop == CropRect{4, 5, 30, 20});
    CHECK(c.bit_depth == 8);

    CHECK(config_from_json(to_json(c)).exemplar.patch_side == 9);
    CHECK(to_json(config_from_json(to_json(c))) == to_json(c));

    CHECK_THROWS_AS(parse_config("[kmeans]\nkk = 3\n"), InvalidInput);
    CHECK_THROWS_AS(parse_config("[nope]\nk = 3\n"), InvalidInput);
    CHECK_THROWS_AS(parse_config("k = 3\n"), InvalidInput);
    CHECK_THROWS_AS(parse_config("[kmeans]\nk = 1\n"), InvalidInput);
    CHECK_THROWS_AS(parse_config("[exemplar]\npatch_side = 6\n"), InvalidInput);
    CHECK_THROWS_AS(parse_config("[output]\nbit_depth = 12\n"), InvalidInput);
    CHECK_THROWS_AS(parse_config("[tv]\nlambda = abc\n"), InvalidInput);
}

TEST_CASE("scene parsing")
{
    const Scene s = parse_scene(R"(
background_depth = 12
[layer]
name = wall
mask = full
primitive = plane
depth = 10
ramp = 0,0,31,0,8
[layer]
name = card
mask = rect:4,5,10,6
primitive = plane
depth = 5
[layer]
name = ball
mask = disc:20,10,4
primitive = sphere
center = 20,10
radius = 4
depth = 6
)",
                                32, 24);
    REQUIRE(s.background_depth.has_value());
    CHECK(*s.background_depth == 12.0);
    REQUIRE(s.layers.size() == 3);
    CHECK(s.layers[0].name == "wall");
    CHECK(count(s.layers[0].mask) == 32u * 24u);
    CHECK(count(s.layers[1].mask) == 60u);
    CHECK(s.layers[1].mask(4, 5) == 1);
    CHECK(s.layers[1].mask(13, 10) == 1);
    CHECK(s.layers[1].mask(14, 10) == 0);
    CHECK(s.layers[2].mask(20, 10) == 1);
    CHECK(s.layers[2].mask(20, 15) == 0);
    REQUIRE(std::holds_alternative<SpherePrimitive>(s.layers[2].primitive));
    CHECK(std::get<SpherePrimitive>(s.layers[2].primitive).radius == 4.0);

    const ComposedDepth d = compose_depth(s.layers, 32, 24, 12.0);
    CHECK(d.depth(0, 0) == doctest::Approx(10.0));
    CHECK(d.depth(31, 0) == doctest::Approx(8.0));
    CHECK(d.depth(5, 6) == 5.0);
    CHECK(d.depth(20, 10) == doctest::Approx(2.0));

    CHECK_THROWS_AS(parse_scene("[layer]\nprimitive = plane\ndepth = 3\n", 8, 8), InvalidInput);
    CHECK_THROWS_AS(parse_scene("[layer]\nmask = full\nprimitive = torus\ndepth = 3\n", 8, 8), InvalidInput);
    CHECK_THROWS_AS(parse_scene("[layer]\nmask = rect:1,2\nprimitive = plane\ndepth = 3\n", 8, 8), InvalidInput);
    CHECK_THROWS_AS(parse_scene("[stuff]\n", 8, 8), InvalidInput);

    const fs::path dir = testing::temp_dir("scene");
    io::save_annotation(annotation_from_mask(testing::rect_mask(8, 8, 2, 2, 3, 3)), dir / "m.png");
    write_text(dir / "s.scene", "[layer]\nmask = m.png\nprimitive = plane\ndepth = 2\n");
    const Scene f = load_scene(dir / "s.scene", 8, 8);
    REQUIRE(f.layers.size() == 1);
    CHECK(f.layers[0].mask == testing::rect_mask(8, 8, 2, 2, 3, 3));
    CHECK_THROWS_AS(load_scene(dir / "s.scene", 9, 8), InvalidInput);
}

TEST_CASE("restore with a mask on a constant image returns the constant")
{
    const fs::path dir = testing::temp_dir("restore-const");
    io::save_png(testing::constant_image(40, 32, 3, 0.4), dir / "in.png", 16);
    io::save_annotation(annotation_from_mask(testing::rect_mask(40, 32, 10, 8, 12, 9)), dir / "mask.png");
    RestoreCommand cmd;
    cmd.image = dir / "in.png";
    cmd.mask = dir / "mask.png";
    run_restore(cmd, dir / "out");
    const Image out = io::load_image(dir / "out" / "final.png");
    for (double v : out.data()) {
        CHECK(v == doctest::Approx(0.4).epsilon(1e-4));
    }
    CHECK(fs::exists(dir / "out" / "tv_init.png"));
    CHECK(fs::exists(dir / "out" / "domain.png"));
    CHECK_FALSE(fs::exists(dir / "out" / "d1.png"));
}

TEST_CASE("restore from seeds is deterministic and replays byte for byte")
{
    const fs::path dir = testing::temp_dir("restore-seeds");
    const Damaged d = damaged_texture(64, 64, 3);
    io::save_png(d.image, dir / "in.png", 16);
    RestoreCommand cmd;
    cmd.image = dir / "in.png";
    cmd.seeds = {{30, 33}, {28, 31}};
    const fs::path m1 = run_restore(cmd, dir / "a");
    const fs::path m2 = run_restore(cmd, dir / "b");
    CHECK(bytes_of(m1) == bytes_of(m2));
    for (const char* name : {"d1.png", "labels.png", "domain.png", "tv_init.png", "final.png"}) {
        CHECK(bytes_of(dir / "a" / name) == bytes_of(dir / "b" / name));
    }
    const ReplayReport r = replay_manifest(m1, dir / "c");
    CHECK(r.ok());
    CHECK(r.matched.size() == 5);
    CHECK(bytes_of(dir / "c" / "manifest.json") == bytes_of(m1));

    // The manifest refuses to replay against a changed input.
    io::save_png(d.truth, dir / "in.png", 16);
    CHECK_THROWS_AS(replay_manifest(m1, dir / "d"), InvalidInput);
}

TEST_CASE("restore recovers a synthetic damaged texture")
{
    const fs::path dir = testing::temp_dir("restore-psnr");
    const Damaged d = damaged_texture(64, 64, 5);
    io::save_png(d.image, dir / "in.png", 16);
    RestoreCommand cmd;
    cmd.image = dir / "in.png";
    cmd.seeds = {{30, 33}};
    run_restore(cmd, dir / "out");
    const Image out = io::load_image(dir / "out" / "final.png");
    CHECK(psnr(out, d.truth, &d.damage) >= 28.0);
    const BinaryMask domain = domain_of(io::load_annotation(dir / "out" / "domain.png"));
    for (std::size_t i = 0; i < domain.size(); ++i) {
        if (d.damage[i]) {
            REQUIRE(domain[i] == 1);
        }
    }
}

TEST_CASE("intermediate files feed the standalone stages")
{
    const fs::path dir = testing::temp_dir("chain");
    const Damaged d = damaged_texture(48, 48, 7);
    io::save_png(d.image, dir / "in.png", 16);
    RestoreCommand rc;
    rc.image = dir / "in.png";
    rc.seeds = {{22, 25}};
    rc.config.kmeans.k = 8;
    run_restore(rc, dir / "restore");

    TvCommand tc;
    tc.image = dir / "in.png";
    tc.mask = dir / "restore" / "domain.png";
    tc.tv = rc.config.tv;
    run_tv(tc, dir / "tv");
    CHECK(bytes_of(dir / "tv" / "tv.png") == bytes_of(dir / "restore" / "tv_init.png"));

    InpaintCommand ic;
    ic.image = dir / "in.png";
    ic.mask = dir / "restore" / "domain.png";
    ic.init = dir / "tv" / "tv.png";
    run_inpaint(ic, dir / "inpaint");
    CHECK(io::load_image(dir / "inpaint" / "inpainted.png").data().size() == d.image.data().size());

    SegmentCommand sc;
    sc.image = dir / "in.png";
    sc.seeds = rc.seeds;
    sc.config = rc.config;
    run_segment(sc, dir / "segment");
    CHECK(bytes_of(dir / "segment" / "domain.png") == bytes_of(dir / "restore" / "domain.png"));
    CHECK(domain_of(io::load_annotation(dir / "segment" / "d1.png")).size() == 48u * 48u);
    const Grid<int> labels = io::decode_label_png(bytes_of(dir / "segment" / "labels.png"));
    CHECK(labels.width() == 48);
}

TEST_CASE("stage failures name the stage and keep earlier artifacts")
{
    const fs::path dir = testing::temp_dir("stage-error");
    io::save_png(testing::random_image(16, 16, 3, 1), dir / "in.png", 16);
    io::save_annotation(annotation_from_mask(BinaryMask(16, 16, 1)), dir / "mask.png");
    RestoreCommand cmd;
    cmd.image = dir / "in.png";
    cmd.mask = dir / "mask.png";
    try {
        run_restore(cmd, dir / "out");
        FAIL("expected a stage error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidInput);
        CHECK(std::string(e.what()).find("stage 'tv'") != std::string::npos);
    }
    CHECK(fs::exists(dir / "out" / "domain.png"));

    RestoreCommand both = cmd;
    both.seeds = {{1, 1}};
    CHECK_THROWS_AS(run_restore(both, dir / "x"), InvalidInput);
    RestoreCommand neither;
    neither.image = cmd.image;
    CHECK_THROWS_AS(run_restore(neither, dir / "y"), InvalidInput);
}

TEST_CASE("empty inpainting domain passes the image through")
{
    const fs::path dir = testing::temp_dir("empty-d");
    const Image rgb = testing::random_image(20, 16, 3, 2);
    io::save_png(rgb, dir / "rgb.png", 16);
    io::save_png(to_gray(rgb), dir / "ir.png", 16);
    io::save_annotation(AnnotationMask(20, 16, Label::Keep), dir / "mask.png");
    run_osmosis({dir / "rgb.png", dir / "ir.png", dir / "mask.png"}, dir / "osm");
    CHECK(bytes_of(dir / "osm" / "osmosis.png") == io::encode_png(io::load_image(dir / "rgb.png"), 16));

    RestoreCommand rc;
    rc.image = dir / "rgb.png";
    rc.mask = dir / "mask.png";
    const fs::path m = run_restore(rc, dir / "restore");
    CHECK(bytes_of(dir / "restore" / "final.png") == io::encode_png(io::load_image(dir / "rgb.png"), 16));
    CHECK(read_text(m).find("inpainting domain is empty") != std::string::npos);
}

TEST_CASE("every command replays from its manifest")
{
    const fs::path dir = testing::temp_dir("replay");
    const Damaged d = damaged_texture(40, 32, 9);
    io::save_png(d.image, dir / "in.png", 16);
    io::save_png(to_gray(d.truth), dir / "ir.png", 16);
    io::save_annotation(annotation_from_mask(d.damage), dir / "mask.png");
    write_text(dir / "scene.txt", "background_depth = 10\n[layer]\nmask = rect:12,8,10,12\nprimitive = plane\ndepth = 5\n");

    std::vector<fs::path> manifests;
    manifests.push_back(run_segment({dir / "in.png", {{18, 17}}, parse_config("[kmeans]\nk = 6\n")}, dir / "seg"));
    manifests.push_back(run_tv({dir / "in.png", dir / "mask.png", {}, 8}, dir / "tv"));
    InpaintCommand ic;
    ic.image = dir / "in.png";
    ic.mask = dir / "mask.png";
    ic.patch.seed = 5;
    manifests.push_back(run_inpaint(ic, dir / "inp"));
    manifests.push_back(run_osmosis({dir / "in.png", dir / "ir.png", dir / "mask.png"}, dir / "osm"));
    StereoCommand sc;
    sc.image = dir / "in.png";
    sc.scene = dir / "scene.txt";
    sc.mode = StereoMode::Anaglyph;
    manifests.push_back(run_stereo(sc, dir / "st"));

    int n = 0;
    for (const fs::path& m : manifests) {
        const ReplayReport r = replay_manifest(m, dir / ("replay" + std::to_string(n++)));
        CHECK(r.ok());
        CHECK_FALSE(r.matched.empty());
        CHECK(bytes_of(r.manifest) == bytes_of(m));
    }

    // A corrupted output hash is reported, not hidden.
    std::string text = read_text(manifests[1]);
    const auto pos = text.find("\"tv.png\": \"") + 11;
    text[pos] = text[pos] == '0' ? '1' : '0';
    write_text(dir / "bad.json", text);
    const ReplayReport bad = replay_manifest(dir / "bad.json", dir / "bad");
    CHECK_FALSE(bad.ok());
    CHECK(bad.mismatched == std::vector<std::string>{"tv.png"});
    write_text(dir / "garbage.json", "{not json");
    CHECK_THROWS_AS(replay_manifest(dir / "garbage.json", dir / "g"), InvalidInput);
}

TEST_CASE("default baseline")
{
    DepthMap flat(4, 4, 10.0);
    CHECK(default_baseline(flat) == doctest::Approx(0.2));
    flat(1, 1) = 5.0;
    CHECK(default_baseline(flat) == doctest::Approx(0.1));
}

TEST_CASE("cli exit codes and diagnostics")
{
    const fs::path dir = testing::temp_dir("cli-codes");
    io::save_png(testing::random_image(16, 16, 3, 1), dir / "rgb.png", 16);
    io::save_annotation(AnnotationMask(16, 16, Label::Keep), dir / "mask.png");
    const std::string out = " --out " + (dir / "out").string();

    Run r = cli("osmosis --rgb " + (dir / "rgb.png").string() + " --mask " + (dir / "mask.png").string() + out, dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("--ir") != std::string::npos);

    r = cli("osmosis --rgb " + (dir / "rgb.png").string() + " --ir " + (dir / "missing.png").string() + " --mask "
                + (dir / "mask.png").string() + out,
            dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("--ir") != std::string::npos);

    r = cli("frobnicate", dir);
    CHECK(r.code == 2);
    r = cli("", dir);
    CHECK(r.code == 2);

    r = cli("segment --image " + (dir / "rgb.png").string() + " --seed-px 3" + out, dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("--seed-px") != std::string::npos);

    // No valid source patch: an algorithmic failure.
    io::save_annotation(annotation_from_mask(testing::rect_mask(16, 16, 2, 2, 12, 12)), dir / "big.png");
    r = cli("inpaint --image " + (dir / "rgb.png").string() + " --mask " + (dir / "big.png").string() + out, dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("infeasible") != std::string::npos);

    r = cli("osmosis --rgb " + (dir / "rgb.png").string() + " --ir " + (dir / "rgb.png").string() + " --mask "
                + (dir / "mask.png").string() + out,
            dir);
    CHECK(r.code == 0);
}

TEST_CASE("cli outputs equal direct library calls")
{
    const fs::path dir = testing::temp_dir("cli-equiv");
    const Damaged d = damaged_texture(40, 32, 11);
    io::save_png(d.image, dir / "in.png", 16);
    io::save_png(to_gray(d.truth), dir / "ir.png", 16);
    io::save_annotation(annotation_from_mask(d.damage), dir / "mask.png");
    write_text(dir / "scene.txt", "[layer]\nmask = rect:12,8,10,12\nprimitive = plane\ndepth = 5\n");
    const std::string in = (dir / "in.png").string();
    const std::string mask = (dir / "mask.png").string();
    const Image img = io::load_image(dir / "in.png");
    const BinaryMask domain = domain_of(io::load_annotation(dir / "mask.png"));

    SUBCASE("tv-inpaint")
    {
        REQUIRE(cli("tv-inpaint --image " + in + " --mask " + mask + " --lambda 800 --max-iter 400 --out "
                        + (dir / "tv").string(),
                    dir)
                    .code
                == 0);
        TvParams p;
        p.lambda = 800;
        p.max_iter = 400;
        CHECK(bytes_of(dir / "tv" / "tv.png") == io::encode_png(tv_inpaint(img, domain, p).image, 16));
    }
    SUBCASE("inpaint")
    {
        REQUIRE(cli("inpaint --image " + in + " --mask " + mask
                        + " --patch-side 5 --iters 6 --scales 1 --seed 9 --init from-tv --out " + (dir / "inp").string(),
                    dir)
                    .code
                == 0);
        PatchParams p;
        p.patch_side = 5;
        p.propagation_iters = 6;
        p.scales = 1;
        p.seed = 9;
        CHECK(bytes_of(dir / "inp" / "inpainted.png") == io::encode_png(inpaint_exemplar(img, domain, p).image, 16));

        io::save_png(testing::constant_image(40, 32, 3, 0.5), dir / "init.png", 16);
        REQUIRE(cli("inpaint --image " + in + " --mask " + mask + " --init from-file --init-file "
                        + (dir / "init.png").string() + " --out " + (dir / "inp2").string(),
                    dir)
                    .code
                == 0);
        const Image init = io::load_image(dir / "init.png");
        CHECK(bytes_of(dir / "inp2" / "inpainted.png")
              == io::encode_png(inpaint_exemplar(img, domain, PatchParams{}, &init).image, 16));
        CHECK(cli("inpaint --image " + in + " --mask " + mask + " --init from-file --out " + (dir / "inp3").string(), dir)
                  .code
              == 2);
    }
    SUBCASE("osmosis")
    {
        REQUIRE(cli("osmosis --rgb " + in + " --ir " + (dir / "ir.png").string() + " --mask " + mask + " --out "
                        + (dir / "osm").string(),
                    dir)
                    .code
                == 0);
        const Image out = osmosis_restore(img, io::load_image(dir / "ir.png"), io::load_annotation(dir / "mask.png"));
        CHECK(bytes_of(dir / "osm" / "osmosis.png") == io::encode_png(out, 16));
    }
    SUBCASE("stereo")
    {
        REQUIRE(cli("stereo --image " + in + " --scene " + (dir / "scene.txt").string()
                        + " --baseline 0.5 --fov 50 --output-mode crossed --out " + (dir / "st").string(),
                    dir)
                    .code
                == 0);
        const Scene scene = load_scene(dir / "scene.txt", 40, 32);
        const ComposedDepth depth = compose_depth(scene.layers, 40, 32, 10.0);
        CameraPose cam;
        cam.fov_deg = 50.0;
        cam.baseline = {0.5, 0.0, 0.0};
        const ViewSynthesis v = synthesize_view(img, depth.depth, cam, PatchParams{});
        CHECK(bytes_of(dir / "st" / "right.png") == io::encode_png(v.image, 16));
        CHECK(bytes_of(dir / "st" / "stereo.png")
              == io::encode_png(make_stereo_outputs(img, v.image, StereoMode::Crossed), 16));
    }
    SUBCASE("replay")
    {
        REQUIRE(cli("tv-inpaint --image " + in + " --mask " + mask + " --out " + (dir / "tv").string(), dir).code == 0);
        CHECK(cli("replay " + (dir / "tv" / "manifest.json").string() + " --out " + (dir / "again").string(), dir).code
              == 0);
        CHECK(bytes_of(dir / "again" / "tv.png") == bytes_of(dir / "tv" / "tv.png"));
    }
}
