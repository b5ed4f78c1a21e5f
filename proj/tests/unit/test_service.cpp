#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "support.hpp"
#include "vellum/http_api.hpp"
#include "vellum/io.hpp"
#include "vellum/service.hpp"

using namespace vellum;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double segment_distance(double px, double py, Pixel a, Pixel b)
{
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (a.x + t * dx), py - (a.y + t * dy));
}

// Direct rasterisation of strokes from the distance definition.
void paint_oracle(AnnotationMask& mask, const std::vector<Stroke>& strokes)
{
    for (const Stroke& s : strokes) {
        for (int y = 0; y < mask.height(); ++y) {
            for (int x = 0; x < mask.width(); ++x) {
                double best = 1e300;
                if (s.points.size() == 1) {
                    best = segment_distance(x, y, s.points[0], s.points[0]);
                }
                for (std::size_t i = 0; i + 1 < s.points.size(); ++i) {
                    best = std::min(best, segment_distance(x, y, s.points[i], s.points[i + 1]));
                }
                if (best <= s.radius) {
                    mask(x, y) = s.label;
                }
            }
        }
    }
}

std::vector<Stroke> random_strokes(std::mt19937_64& rng, int w, int h, int n)
{
    std::vector<Stroke> out;
    for (int i = 0; i < n; ++i) {
        Stroke s;
        s.label = *(kAllLabels.begin() + rng() % kAllLabels.size());
        const int np = 1 + static_cast<int>(rng() % 4);
        for (int k = 0; k < np; ++k) {
            s.points.push_back({static_cast<int>(rng() % (w + 6)) - 3, static_cast<int>(rng() % (h + 6)) - 3});
        }
        s.radius = static_cast<double>(rng() % 9) * 0.5;
        out.push_back(s);
    }
    return out;
}

json strokes_json(const std::vector<Stroke>& strokes)
{
    json arr = json::array();
    for (const Stroke& s : strokes) {
        json pts = json::array();
        for (const Pixel& p : s.points) {
            pts.push_back({p.x, p.y});
        }
        arr.push_back({{"label", std::string(label_name(s.label))}, {"points", pts}, {"radius", s.radius}});
    }
    return {{"strokes", arr}};
}

// Dark blob on a lighter two-tone background.
Image test_image(int w, int h)
{
    Image img(w, h, 3, ColorSpace::SRGB);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool blob = (x - 10) * (x - 10) + (y - 11) * (y - 11) <= 16;
            for (int c = 0; c < 3; ++c) {
                img.at(x, y, c) = blob ? 0.1 : ((x / 4 + y / 4) % 2 == 0 ? 0.7 : 0.8) - 0.05 * c;
            }
        }
    }
    return img;
}

std::vector<std::uint8_t> png_of(const Image& img)
{
    return io::encode_png(img, 16);
}

int status_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const ServiceError& e) {
        return e.status();
    }
    return 200;
}

std::string missing_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const ServiceError& e) {
        return e.missing();
    }
    return {};
}

} // namespace

TEST_CASE("paint_strokes matches the distance definition")
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        const auto strokes = random_strokes(rng, 20, 15, 5);
        AnnotationMask a(20, 15, Label::Keep);
        AnnotationMask b = a;
        paint_strokes(a, strokes);
        paint_oracle(b, strokes);
        REQUIRE(a == b);
    }
}

TEST_CASE("stroke json parsing")
{
    const auto s = strokes_from_json(json::parse(R"({"strokes": [{"label": "neumann_edge", "points": [[1,2],[3,4]], "radius": 1.5}]})"));
    REQUIRE(s.size() == 1);
    CHECK(s[0].label == Label::NeumannEdge);
    CHECK(s[0].points == std::vector<Pixel>{{1, 2}, {3, 4}});
    CHECK(s[0].radius == 1.5);
    CHECK(status_of([] { strokes_from_json(json::parse(R"({"strokes": [{"label": "purple", "points": [[1,2]]}]})")); }) == 400);
    CHECK(status_of([] { strokes_from_json(json::parse(R"({"strokes": [{"label": "keep", "points": []}]})")); }) == 400);
    CHECK(status_of([] { strokes_from_json(json::parse(R"({"strokes": [{"label": "keep", "points": [[1.5,2]]}]})")); }) == 400);
    CHECK(status_of([] { strokes_from_json(json::parse(R"({"strokes": [{"label": "keep", "points": [[1,2]], "radius": -1}]})")); })
          == 400);
    CHECK(status_of([] { strokes_from_json(json::parse(R"({"lines": []})")); }) == 400);
}

TEST_CASE("service stroke round trip decodes to the painted label field")
{
    AnnotationService svc({testing::temp_dir("svc-strokes"), 1});
    const std::string id = svc.create_session(png_of(test_image(24, 20)));
    std::mt19937_64 rng(2);
    AnnotationMask expected(24, 20, Label::Keep);
    for (int round = 0; round < 10; ++round) {
        const auto strokes = random_strokes(rng, 24, 20, 3);
        svc.add_strokes(id, strokes);
        paint_oracle(expected, strokes);
        CHECK(decode_annotation(svc.artifact(id, "annotation"), 24, 20) == expected);
    }
}

TEST_CASE("dependencies, caching and errors")
{
    AnnotationService svc({testing::temp_dir("svc-deps"), 2});
    CHECK(status_of([&] { svc.create_session(std::vector<std::uint8_t>{1, 2, 3}); }) == 400);
    const std::string id = svc.create_session(png_of(test_image(24, 20)));
    CHECK(status_of([&] { svc.session_state("nope"); }) == 404);
    CHECK(status_of([&] { svc.artifact(id, "D1"); }) == 409);
    CHECK(missing_of([&] { svc.artifact(id, "D1"); }) == "D1");
    CHECK(missing_of([&] { svc.run_stage(id, "D1", {}); }) == "seeds");
    CHECK(missing_of([&] { svc.run_stage(id, "osmosis", {}); }) == "infrared");
    CHECK(missing_of([&] { svc.run_stage(id, "tv", {}); }) == "D");
    CHECK(status_of([&] { svc.run_stage(id, "sharpen", {}); }) == 404);
    CHECK(status_of([&] { svc.run_stage(id, "labels", {{"k", 1}}); }) == 400);
    CHECK(status_of([&] { svc.run_stage(id, "labels", {{"colour", 1}}); }) == 400);
    CHECK(status_of([&] { svc.run_stage(id, "osmosis", {{"k", 3}}); }) == 400);
    CHECK(status_of([&] { svc.set_seeds(id, {{30, 1}}); }) == 400);
    CHECK(status_of([&] { svc.job(id, "99"); }) == 404);
    CHECK(status_of([&] { svc.artifact(id, "whatever"); }) == 404);

    svc.set_seeds(id, {{10, 11}});
    const JobStatus first = svc.wait(id, svc.run_stage(id, "D1", {}));
    REQUIRE(first.state == JobState::Done);
    CHECK_FALSE(first.cached);
    const auto bytes = svc.artifact(id, "D1");
    const JobStatus second = svc.wait(id, svc.run_stage(id, "D1", {}));
    CHECK(second.state == JobState::Done);
    CHECK(second.cached);
    CHECK(svc.artifact(id, "D1") == bytes);
    const BinaryMask d1 = select_labels(decode_annotation(bytes), {Label::Training});
    CHECK(d1(10, 11) == 1);
    CHECK(d1(0, 0) == 0);

    // Stage failure: the whole image marked for inpainting leaves no data.
    const std::string full = svc.create_session(png_of(test_image(24, 20)));
    svc.add_strokes(full, {Stroke{Label::Inpaint, {{0, 0}, {23, 19}}, 40.0}});
    REQUIRE(svc.wait(full, svc.run_stage(full, "D", {})).state == JobState::Done);
    const JobStatus tv = svc.wait(full, svc.run_stage(full, "tv", {}));
    CHECK(tv.state == JobState::Failed);
    CHECK(tv.error_kind == "invalid-input");
    CHECK(status_of([&] { svc.artifact(full, "tv"); }) == 500);
}

TEST_CASE("mutations invalidate exactly the downstream artifacts")
{
    // Independent model of the stage graph; D's inputs depend on its source.
    const std::map<std::string, std::set<std::string>> fixed{{"D1", {"image", "seeds"}},
                                                              {"labels", {"image"}},
                                                              {"tv", {"image", "D"}},
                                                              {"exemplar", {"image", "D", "tv"}},
                                                              {"osmosis", {"image", "infrared", "annotation"}}};
    std::mt19937_64 rng(7);
    int runs = 0;
    int dropped = 0;
    for (int trial = 0; trial < 4; ++trial) {
        AnnotationService svc({testing::temp_dir("svc-dag" + std::to_string(trial)), 2});
        const std::string id = svc.create_session(png_of(test_image(24, 20)));
        std::map<std::string, std::set<std::string>> valid; // artifact -> inputs it was built from
        std::map<std::string, std::vector<std::uint8_t>> bytes;

        auto drop_downstream = [&](const std::string& node) {
            std::set<std::string> dirty{node};
            bool grew = true;
            while (grew) {
                grew = false;
                for (const auto& [name, deps] : valid) {
                    if (dirty.count(name) == 0
                        && std::any_of(deps.begin(), deps.end(), [&](const std::string& d) { return dirty.count(d) != 0; })) {
                        dirty.insert(name);
                        grew = true;
                    }
                }
            }
            dirty.erase(node);
            for (const auto& n : dirty) {
                dropped += static_cast<int>(valid.erase(n));
            }
        };
        auto check_state = [&] {
            std::set<std::string> model;
            for (const auto& [name, deps] : valid) {
                model.insert(name);
            }
            REQUIRE(svc.valid_artifacts(id) == model);
            for (const auto& name : model) {
                REQUIRE(svc.artifact(id, name) == bytes[name]);
            }
        };
        bool have_seeds = false;
        bool have_ir = false;
        std::vector<Pixel> current_seeds;
        int current_ir = -1;

        for (int step = 0; step < 40; ++step) {
            const int op = static_cast<int>(rng() % 10);
            if (op == 0) {
                const std::vector<Pixel> seeds = rng() % 2 == 0 ? std::vector<Pixel>{{10, 11}}
                                                                : std::vector<Pixel>{{9, 10}, {11, 12}};
                svc.set_seeds(id, seeds);
                if (!have_seeds || seeds != current_seeds) {
                    drop_downstream("seeds");
                }
                have_seeds = true;
                current_seeds = seeds;
            } else if (op == 1) {
                Stroke s{rng() % 3 == 0 ? Label::Keep : Label::Inpaint,
                         {{static_cast<int>(rng() % 24), static_cast<int>(rng() % 20)}},
                         static_cast<double>(1 + rng() % 3)};
                const auto before = svc.artifact(id, "annotation");
                svc.add_strokes(id, {s});
                if (svc.artifact(id, "annotation") != before) {
                    drop_downstream("annotation");
                }
            } else if (op == 2) {
                const int ir_seed = static_cast<int>(rng() % 2);
                svc.set_infrared(id, png_of(testing::random_image(24, 20, 1, ir_seed, 0.2, 0.9)));
                if (!have_ir || ir_seed != current_ir) {
                    drop_downstream("infrared");
                }
                have_ir = true;
                current_ir = ir_seed;
            } else {
                static const std::vector<std::string> stages{"D1", "labels", "D", "tv", "exemplar", "osmosis"};
                const std::string stage = stages[rng() % stages.size()];
                json params = json::object();
                std::set<std::string> deps;
                if (stage == "D") {
                    const bool seg = have_seeds && rng() % 2 == 0;
                    params["source"] = seg ? "segmentation" : "annotation";
                    deps = seg ? std::set<std::string>{"D1", "labels"} : std::set<std::string>{"annotation"};
                    if (rng() % 3 == 0) {
                        params["closing_radius"] = static_cast<int>(rng() % 3);
                    }
                } else {
                    deps = fixed.at(stage);
                }
                if (stage == "labels") {
                    params["k"] = 2 + static_cast<int>(rng() % 3);
                }
                if (stage == "exemplar") {
                    params["patch_side"] = 3;
                }
                std::set<std::string> missing;
                for (const auto& d : deps) {
                    const bool ok = d == "image" || d == "annotation" || (d == "seeds" && have_seeds)
                        || (d == "infrared" && have_ir) || valid.count(d) != 0;
                    if (!ok) {
                        missing.insert(d);
                    }
                }
                if (!missing.empty()) {
                    const std::string m = missing_of([&] { svc.run_stage(id, stage, params); });
                    CHECK(missing.count(m) == 1);
                    check_state();
                    continue;
                }
                const JobStatus st = svc.wait(id, svc.run_stage(id, stage, params));
                if (st.state == JobState::Failed) {
                    check_state();
                    continue;
                }
                const auto out = svc.artifact(id, stage);
                if (valid.count(stage) == 0 || bytes[stage] != out) {
                    drop_downstream(stage);
                }
                valid[stage] = deps;
                bytes[stage] = out;
                ++runs;
            }
            check_state();
        }
    }
    // The random walk must actually exercise runs and cascades.
    CHECK(runs >= 30);
    CHECK(dropped >= 10);
    MESSAGE("stage runs: " << runs << ", invalidated artifacts: " << dropped);
}

TEST_CASE("sessions survive a service restart")
{
    const fs::path store = testing::temp_dir("svc-persist");
    std::string id;
    std::vector<std::uint8_t> d1;
    {
        AnnotationService svc({store, 1});
        id = svc.create_session(png_of(test_image(24, 20)));
        svc.set_seeds(id, {{10, 11}});
        svc.add_strokes(id, {Stroke{Label::Inpaint, {{3, 3}, {8, 3}}, 1.0}});
        REQUIRE(svc.wait(id, svc.run_stage(id, "D1", {})).state == JobState::Done);
        d1 = svc.artifact(id, "D1");
    }
    AnnotationService again({store, 1});
    CHECK(again.artifact(id, "D1") == d1);
    CHECK(again.session_state(id)["seeds"] == json::array({json::array({10, 11})}));
    CHECK(domain_of(decode_annotation(again.artifact(id, "annotation")))(5, 3) == 1);
    CHECK(again.wait(id, again.run_stage(id, "D1", {})).cached);
}

TEST_CASE("concurrent sessions are independent")
{
    AnnotationService svc({testing::temp_dir("svc-conc"), 3});
    const Image img = test_image(24, 20);
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) {
        ids.push_back(svc.create_session(png_of(img)));
    }
    std::vector<std::vector<std::uint8_t>> results(ids.size());
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        threads.emplace_back([&, i] {
            svc.add_strokes(ids[i], {Stroke{Label::Inpaint, {{14, 4}, {20, 6}}, 1.5}});
            svc.wait(ids[i], svc.run_stage(ids[i], "D", {}));
            // Several runs racing on one session still serialise.
            const std::string a = svc.run_stage(ids[i], "tv", {});
            const std::string b = svc.run_stage(ids[i], "tv", {{"max_iter", 300}});
            svc.wait(ids[i], a);
            svc.wait(ids[i], b);
            results[i] = svc.artifact(ids[i], "tv");
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        CHECK(results[i] == results[0]);
    }
}

TEST_CASE("http api")
{
    AnnotationService svc({testing::temp_dir("svc-http"), 2});
    httplib::Server server;
    register_routes(server, svc);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);

    const auto img = png_of(test_image(24, 20));
    auto res = cli.Post("/sessions", std::string(img.begin(), img.end()), "image/png");
    REQUIRE(res);
    REQUIRE(res->status == 201);
    const std::string id = json::parse(res->body)["id"];

    res = cli.Post("/sessions", "not a png", "image/png");
    CHECK(res->status == 400);
    res = cli.Get("/sessions/abc123");
    CHECK(res->status == 404);

    res = cli.Get("/sessions/" + id + "/artifacts/D1");
    CHECK(res->status == 409);
    CHECK(json::parse(res->body)["missing"] == "D1");

    res = cli.Post("/sessions/" + id + "/seeds", R"({"seeds": [[10, 11]]})", "application/json");
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["seeds"] == json::array({json::array({10, 11})}));
    res = cli.Post("/sessions/" + id + "/seeds", R"({"seeds": [[10]]})", "application/json");
    CHECK(res->status == 400);
    res = cli.Post("/sessions/" + id + "/seeds", "{oops", "application/json");
    CHECK(res->status == 400);

    std::mt19937_64 rng(3);
    const auto strokes = random_strokes(rng, 24, 20, 6);
    res = cli.Post("/sessions/" + id + "/strokes", strokes_json(strokes).dump(), "application/json");
    CHECK(res->status == 200);
    AnnotationMask expected(24, 20, Label::Keep);
    paint_oracle(expected, strokes);
    res = cli.Get("/sessions/" + id + "/artifacts/annotation");
    REQUIRE(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "image/png");
    const std::vector<std::uint8_t> ann(res->body.begin(), res->body.end());
    CHECK(decode_annotation(ann, 24, 20) == expected);

    res = cli.Post("/sessions/" + id + "/stages/D1/run", "", "application/json");
    REQUIRE(res->status == 202);
    const std::string job = json::parse(res->body)["job"];
    json st;
    for (int i = 0; i < 500; ++i) {
        st = json::parse(cli.Get("/sessions/" + id + "/jobs/" + job)->body);
        if (st["state"] == "done" || st["state"] == "failed") {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    CHECK(st["state"] == "done");
    res = cli.Get("/sessions/" + id + "/artifacts/D1");
    REQUIRE(res->status == 200);
    CHECK(std::vector<std::uint8_t>(res->body.begin(), res->body.end()) == svc.artifact(id, "D1"));

    res = cli.Post("/sessions/" + id + "/stages/D1/run", "", "application/json");
    CHECK(json::parse(res->body)["cached"] == true);
    res = cli.Post("/sessions/" + id + "/stages/nope/run", "", "application/json");
    CHECK(res->status == 404);
    res = cli.Post("/sessions/" + id + "/stages/labels/run", R"({"k": 1})", "application/json");
    CHECK(res->status == 400);
    res = cli.Post("/sessions/" + id + "/stages/osmosis/run", "", "application/json");
    CHECK(res->status == 409);
    CHECK(json::parse(res->body)["missing"] == "infrared");
    res = cli.Get("/sessions/" + id + "/jobs/12345");
    CHECK(res->status == 404);

    server.stop();
    th.join();
}
