#pragma once

// Synthetic inputs shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "vellum/image.hpp"

namespace testing {

using vellum::BinaryMask;
using vellum::Image;

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Image random_image(int w, int h, int nc, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
    std::mt19937_64 rng(seed);
    Image img(w, h, nc, nc == 1 ? vellum::ColorSpace::Gray : vellum::ColorSpace::SRGB);
    for (auto& v : img.data()) {
        v = uniform(rng, lo, hi);
    }
    return img;
}

inline Image constant_image(int w, int h, int nc, double value)
{
    Image img(w, h, nc, nc == 1 ? vellum::ColorSpace::Gray : vellum::ColorSpace::SRGB);
    for (auto& v : img.data()) {
        v = value;
    }
    return img;
}

inline BinaryMask rect_mask(int w, int h, int x0, int y0, int rw, int rh)
{
    BinaryMask m(w, h, 0);
    for (int y = y0; y < y0 + rh; ++y) {
        for (int x = x0; x < x0 + rw; ++x) {
            if (m.contains(x, y)) {
                m(x, y) = 1;
            }
        }
    }
    return m;
}

inline BinaryMask disc_mask(int w, int h, double cx, double cy, double r)
{
    BinaryMask m(w, h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) {
                m(x, y) = 1;
            }
        }
    }
    return m;
}

/// Smooth periodic texture with the given period in both directions: an
/// exact tile repeats every `period` pixels.
inline Image periodic_texture(int w, int h, int period, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<double> tile(static_cast<std::size_t>(period * period * 3));
    for (auto& v : tile) {
        v = uniform(rng, 0.15, 0.85);
    }
    Image img(w, h, 3, vellum::ColorSpace::SRGB);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(x, y, c) = tile[static_cast<std::size_t>(((y % period) * period + (x % period)) * 3 + c)];
            }
        }
    }
    return img;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("vellum-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing
