#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "vellum/exemplar.hpp"

using namespace vellum;

namespace {

double distance_oracle(const Image& img, Pixel a, Pixel b, int side)
{
    const int h = side / 2;
    double s = 0.0;
    for (int dy = -h; dy <= h; ++dy) {
        for (int dx = -h; dx <= h; ++dx) {
            for (int c = 0; c < img.channels(); ++c) {
                const double e = img.at(a.x + dx, a.y + dy, c) - img.at(b.x + dx, b.y + dy, c);
                s += e * e;
            }
        }
    }
    return s;
}

// Sum of random-phase sinusoids plus a little noise: locally similar but not
// exactly repeating.
Image wave_texture(int w, int h, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    Image img(w, h, 3, ColorSpace::SRGB);
    double fx[3][3], fy[3][3], ph[3][3];
    for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 3; ++k) {
            fx[c][k] = testing::uniform(rng, 0.1, 0.6);
            fy[c][k] = testing::uniform(rng, 0.1, 0.6);
            ph[c][k] = testing::uniform(rng, 0, 6.28);
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = 0.5;
                for (int k = 0; k < 3; ++k) {
                    v += 0.1 * std::sin(fx[c][k] * x + fy[c][k] * y + ph[c][k]);
                }
                img.at(x, y, c) = std::clamp(v + testing::uniform(rng, -0.02, 0.02), 0.0, 1.0);
            }
        }
    }
    return img;
}

// Repeating tile with per-pixel noise, so repeats are close but never exact.
Image noisy_texture(int w, int h, std::uint64_t seed)
{
    Image img = testing::periodic_texture(w, h, 8, seed);
    std::mt19937_64 rng(seed + 1);
    for (auto& v : img.data()) {
        v = std::clamp(v + testing::uniform(rng, -0.05, 0.05), 0.0, 1.0);
    }
    return img;
}

bool full_patch_known(const BinaryMask& d, Pixel t, int side)
{
    const int half = side / 2;
    for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
            const int x = t.x + dx;
            const int y = t.y + dy;
            if (x < 0 || y < 0 || x >= d.width() || y >= d.height() || d(x, y) != 0) {
                return false;
            }
        }
    }
    return true;
}

void check_all_valid(const BinaryMask& d, const ShiftMap& nnf)
{
    for (std::size_t i = 0; i < nnf.size(); ++i) {
        REQUIRE(full_patch_known(d, nnf.target(i), nnf.patch_side()));
    }
}

} // namespace

TEST_CASE("patch distance")
{
    const Image img = testing::random_image(12, 12, 3, 1);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 50; ++i) {
        const Pixel a{static_cast<int>(rng() % 8) + 2, static_cast<int>(rng() % 8) + 2};
        const Pixel b{static_cast<int>(rng() % 8) + 2, static_cast<int>(rng() % 8) + 2};
        CHECK(patch_distance(img, a, b, 5) == doctest::Approx(distance_oracle(img, a, b, 5)).epsilon(1e-12));
        CHECK(patch_distance(img, a, b, 5) == patch_distance(img, b, a, 5));
        CHECK(patch_distance(img, a, a, 5) == 0.0);
    }
    const Image c = testing::constant_image(12, 12, 3, 0.3);
    CHECK(patch_distance(c, {3, 3}, {8, 7}, 5) == 0.0);
    CHECK_THROWS_AS(patch_distance(img, {1, 5}, {5, 5}, 5), InvalidInput);
    CHECK_THROWS_AS(patch_distance(img, {5, 5}, {5, 10}, 5), InvalidInput);
    CHECK_THROWS_AS(patch_distance(img, {5, 5}, {5, 5}, 4), InvalidInput);
}

TEST_CASE("shift map layout")
{
    BinaryMask d(10, 10, 0);
    d(0, 0) = 1;
    d(5, 4) = 1;
    d(9, 9) = 1;
    const ShiftMap m(d, 5);
    REQUIRE(m.size() == 3);
    CHECK(m.pixel(0) == Pixel{0, 0});
    CHECK(m.pixel(1) == Pixel{5, 4});
    CHECK(m.center(0) == Pixel{2, 2});
    CHECK(m.center(1) == Pixel{5, 4});
    CHECK(m.center(2) == Pixel{7, 7});
    CHECK(m.index_of(5, 4) == 1);
    CHECK(m.index_of(4, 4) == -1);
}

TEST_CASE("valid targets have their whole patch outside D")
{
    const BinaryMask d = testing::disc_mask(20, 16, 9, 7, 3);
    for (int side : {3, 5, 7}) {
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 20; ++x) {
                CHECK(valid_target(d, {x, y}, side) == full_patch_known(d, {x, y}, side));
            }
        }
    }
    // A border entry's clamped centre is outside D here, but its patch is not.
    BinaryMask edge(10, 10, 0);
    edge(9, 5) = 1;
    CHECK_FALSE(valid_target(edge, ShiftMap(edge, 5).center(0), 5));
}

TEST_CASE("single valid target attracts every entry")
{
    // 9x9 image, 3x3 patches: only centre (1,1) lies outside D with a full patch.
    BinaryMask d(9, 9, 1);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 3; ++x) {
            d(x, y) = 0;
        }
    }
    const Image img = testing::random_image(9, 9, 1, 3);
    const ShiftMap bf = brute_force_nnf(img, d, 3);
    for (std::size_t i = 0; i < bf.size(); ++i) {
        CHECK(bf.target(i) == Pixel{1, 1});
    }
    PatchParams p;
    p.patch_side = 3;
    const ShiftMap pm = patchmatch_nnf(img, d, nullptr, p);
    CHECK(pm == bf);
}

TEST_CASE("no valid target is infeasible")
{
    const Image img = testing::random_image(8, 8, 1, 3);
    const BinaryMask d = testing::rect_mask(8, 8, 1, 1, 6, 6);
    PatchParams p;
    p.patch_side = 3;
    CHECK_THROWS_AS(patchmatch_nnf(img, d, nullptr, p), InfeasibleDomain);
    CHECK_THROWS_AS(brute_force_nnf(img, d, 3), InfeasibleDomain);
    CHECK_THROWS_AS(brute_force_nnf(testing::random_image(129, 10, 1, 0), BinaryMask(129, 10, 0), 3), Error);
}

TEST_CASE("brute force on periodic texture finds exact repeats")
{
    const Image img = testing::periodic_texture(40, 40, 8, 4);
    const BinaryMask d = testing::rect_mask(40, 40, 16, 16, 8, 8);
    const ShiftMap bf = brute_force_nnf(img, d, 5);
    check_all_valid(d, bf);
    for (std::size_t i = 0; i < bf.size(); ++i) {
        CHECK(patch_distance(img, bf.center(i), bf.target(i), 5) == 0.0);
    }
}

TEST_CASE("brute force breaks ties at the smallest target")
{
    const Image img = testing::constant_image(12, 12, 1, 0.5);
    const BinaryMask d = testing::rect_mask(12, 12, 5, 5, 2, 2);
    const ShiftMap bf = brute_force_nnf(img, d, 3);
    for (std::size_t i = 0; i < bf.size(); ++i) {
        CHECK(bf.target(i) == Pixel{1, 1});
    }
}

TEST_CASE("brute force beats random alternatives")
{
    const Image img = testing::random_image(32, 32, 3, 5);
    const BinaryMask d = testing::disc_mask(32, 32, 15, 16, 4);
    const ShiftMap bf = brute_force_nnf(img, d, 5);
    std::mt19937_64 rng(6);
    for (std::size_t i = 0; i < bf.size(); ++i) {
        const double best = patch_distance(img, bf.center(i), bf.target(i), 5);
        int tried = 0;
        while (tried < 100) {
            const Pixel t{static_cast<int>(rng() % 32), static_cast<int>(rng() % 32)};
            if (!valid_target(d, t, 5)) {
                continue;
            }
            ++tried;
            CHECK(best <= patch_distance(img, bf.center(i), t, 5));
        }
    }
}

TEST_CASE("patchmatch started at the optimum stays there")
{
    const Image img = wave_texture(32, 32, 1);
    const BinaryMask d = testing::disc_mask(32, 32, 16, 16, 5);
    const ShiftMap bf = brute_force_nnf(img, d, 7);
    PatchParams p;
    const ShiftMap pm = patchmatch_nnf(img, d, &bf, p);
    CHECK(pm == bf);
}

TEST_CASE("patchmatch energy is monotone, valid and deterministic")
{
    const Image img = wave_texture(48, 48, 2);
    const BinaryMask d = testing::disc_mask(48, 48, 20, 25, 7);
    PatchParams p;
    p.seed = 77;
    std::vector<double> trace;
    const ShiftMap a = patchmatch_nnf(img, d, nullptr, p, nullptr, &trace);
    REQUIRE(trace.size() == static_cast<std::size_t>(p.propagation_iters + 1));
    for (std::size_t i = 1; i < trace.size(); ++i) {
        CHECK(trace[i] <= trace[i - 1]);
    }
    CHECK(trace.back() == doctest::Approx(nnf_energy(img, a)).epsilon(1e-12));
    check_all_valid(d, a);
    const ShiftMap b = patchmatch_nnf(img, d, nullptr, p);
    CHECK(a == b);
}

TEST_CASE("patchmatch is within 10% of brute force on 64x64")
{
    const Image img = noisy_texture(64, 64, 9);
    const BinaryMask d = testing::disc_mask(64, 64, 30, 33, 9);
    const double opt = nnf_energy(img, brute_force_nnf(img, d, 7));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        PatchParams p;
        p.seed = seed;
        const double e = nnf_energy(img, patchmatch_nnf(img, d, nullptr, p));
        CHECK(e <= 1.1 * opt);
    }
}

TEST_CASE("depth constraint restricts targets")
{
    const Image img = wave_texture(32, 32, 3);
    const BinaryMask d = testing::rect_mask(32, 32, 12, 12, 6, 6);
    TargetConstraint con{Grid<double>(32, 32, 1.0), Grid<double>(32, 32, 0.0)};
    for (int y = 0; y < 32; ++y) {
        for (int x = 20; x < 32; ++x) {
            con.target_depth(x, y) = 5.0;
        }
    }
    for (int y = 12; y < 18; ++y) {
        for (int x = 12; x < 18; ++x) {
            con.min_depth(x, y) = 4.0;
        }
    }
    PatchParams p;
    p.patch_side = 5;
    const ShiftMap pm = patchmatch_nnf(img, d, nullptr, p, &con);
    CHECK_NOTHROW(check_nnf(d, pm, &con));
    const ShiftMap bf = brute_force_nnf(img, d, 5, &con);
    CHECK_NOTHROW(check_nnf(d, bf, &con));
    for (std::size_t i = 0; i < bf.size(); ++i) {
        CHECK(bf.target(i).x >= 20);
    }
}

TEST_CASE("reconstruct properties")
{
    SUBCASE("constant image stays constant")
    {
        const Image img = testing::constant_image(20, 20, 3, 0.6);
        const BinaryMask d = testing::rect_mask(20, 20, 7, 7, 5, 5);
        PatchParams p;
        p.patch_side = 5;
        const Image r = reconstruct(img, d, patchmatch_nnf(img, d, nullptr, p));
        for (double v : r.data()) {
            CHECK(v == doctest::Approx(0.6).epsilon(1e-12));
        }
    }
    SUBCASE("exact repeats rebuild the texture")
    {
        const Image truth = testing::periodic_texture(48, 48, 8, 11);
        const BinaryMask d = testing::rect_mask(48, 48, 20, 18, 8, 8);
        Image torn = truth;
        for (int y = 18; y < 26; ++y) {
            for (int x = 20; x < 28; ++x) {
                for (int c = 0; c < 3; ++c) {
                    torn.at(x, y, c) = 0.0;
                }
            }
        }
        // Zero-distance field built from the truth, applied to the torn image.
        const ShiftMap nnf = brute_force_nnf(truth, d, 7);
        for (std::size_t i = 0; i < nnf.size(); ++i) {
            REQUIRE(patch_distance(truth, nnf.center(i), nnf.target(i), 7) == 0.0);
        }
        const Image r = reconstruct(torn, d, nnf);
        CHECK(psnr(r, truth, &d) >= 40.0);
    }
    SUBCASE("uniform source region fills D with its colour")
    {
        Image img = testing::random_image(30, 30, 3, 2);
        BinaryMask d(30, 30, 0);
        for (int y = 0; y < 30; ++y) {
            for (int x = 0; x < 30; ++x) {
                if (x < 10) {
                    for (int c = 0; c < 3; ++c) {
                        img.at(x, y, c) = 0.1 * (c + 1);
                    }
                }
                d(x, y) = x >= 12 ? 1 : 0;
            }
        }
        ShiftMap nnf(d, 3);
        for (std::size_t i = 0; i < nnf.size(); ++i) {
            nnf.set_target(i, {4, 4});
        }
        const Image r = reconstruct(img, d, nnf);
        for (int y = 0; y < 30; ++y) {
            for (int x = 12; x < 30; ++x) {
                for (int c = 0; c < 3; ++c) {
                    CHECK(r.at(x, y, c) == doctest::Approx(0.1 * (c + 1)).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("reconstruct never touches pixels outside D")
{
    const Image img = testing::random_image(32, 32, 3, 8);
    const BinaryMask d = testing::disc_mask(32, 32, 14, 18, 6);
    PatchParams p;
    const Image r = reconstruct(img, d, patchmatch_nnf(img, d, nullptr, p));
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            if (!d(x, y)) {
                for (int c = 0; c < 3; ++c) {
                    CHECK(r.at(x, y, c) == img.at(x, y, c));
                }
            }
        }
    }
}

TEST_CASE("exemplar inpainting of a periodic hole")
{
    const Image truth = testing::periodic_texture(64, 64, 8, 21);
    const BinaryMask d = testing::rect_mask(64, 64, 26, 26, 10, 10);
    Image torn = truth;
    for (int y = 26; y < 36; ++y) {
        for (int x = 26; x < 36; ++x) {
            for (int c = 0; c < 3; ++c) {
                torn.at(x, y, c) = 1.0;
            }
        }
    }
    PatchParams p;
    p.patch_side = 7;
    p.scales = 2;
    p.seed = 5;
    const auto r = inpaint_exemplar(torn, d, p);
    CHECK(psnr(r.image, truth, &d) >= 30.0);
    CHECK(r.scales_used == 2);
    for (const auto& trace : r.energy_per_scale) {
        for (std::size_t i = 1; i < trace.size(); ++i) {
            CHECK(trace[i] <= trace[i - 1]);
        }
    }
    check_all_valid(d, r.nnf);
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            if (!d(x, y)) {
                for (int c = 0; c < 3; ++c) {
                    REQUIRE(r.image.at(x, y, c) == torn.at(x, y, c));
                }
            }
        }
    }
    const auto again = inpaint_exemplar(torn, d, p);
    CHECK(again.image == r.image);
}

TEST_CASE("exemplar fills a hole on the image border")
{
    // Patches of border entries are mostly unknown; matching them against
    // other partly unknown patches would settle on the smooth initial fill.
    const Image truth = testing::periodic_texture(64, 48, 8, 12);
    const BinaryMask d = testing::rect_mask(64, 48, 60, 0, 4, 48);
    Image damaged = truth;
    for (int y = 0; y < 48; ++y) {
        for (int x = 60; x < 64; ++x) {
            for (int c = 0; c < 3; ++c) {
                damaged.at(x, y, c) = 0.0;
            }
        }
    }
    PatchParams p;
    p.seed = 3;
    const auto r = inpaint_exemplar(damaged, d, p);
    CHECK(psnr(r.image, truth, &d) >= 30.0);
    check_all_valid(d, r.nnf);
}

TEST_CASE("exemplar with empty domain returns the input")
{
    const Image img = testing::random_image(16, 16, 3, 1);
    CHECK(inpaint_exemplar(img, BinaryMask(16, 16, 0), PatchParams{}).image == img);
}

TEST_CASE("patch params validation")
{
    PatchParams p;
    p.patch_side = 4;
    CHECK_THROWS_AS(p.validate(), InvalidInput);
    p.patch_side = 1;
    CHECK_THROWS_AS(p.validate(), InvalidInput);
    p.patch_side = 5;
    CHECK_NOTHROW(p.validate());
}
