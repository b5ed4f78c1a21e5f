#include "vellum/segmentation.hpp"

#include <cmath>
#include <string>

namespace vellum {
namespace {

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

// Running count/mean/fit of one phase. The fit is updated with the
// cancellation-free rank-one formulas, never as q - s^2/n.
struct Phase {
    double n = 0.0;
    double mean = 0.0;

    double add_cost(double f) const { return n == 0.0 ? 0.0 : n / (n + 1.0) * (f - mean) * (f - mean); }
    double remove_cost(double f) const { return n <= 1.0 ? 0.0 : -n / (n - 1.0) * (f - mean) * (f - mean); }
    void add(double f)
    {
        n += 1.0;
        mean += (f - mean) / n;
    }
    void remove(double f)
    {
        if (n <= 1.0) {
            n = 0.0;
            mean = 0.0;
            return;
        }
        mean = (n * mean - f) / (n - 1.0);
        n -= 1.0;
    }
};

std::size_t boundary_pairs(const BinaryMask& region)
{
    std::size_t length = 0;
    for (int y = 0; y < region.height(); ++y) {
        for (int x = 0; x < region.width(); ++x) {
            if (x + 1 < region.width() && region(x, y) != region(x + 1, y)) {
                ++length;
            }
            if (y + 1 < region.height() && region(x, y) != region(x, y + 1)) {
                ++length;
            }
        }
    }
    return length;
}

Grid<double> gray_grid(const Image& img)
{
    return to_gray(img).channel(0);
}

double energy_on(const Grid<double>& f, const BinaryMask& region, const ChanVeseParams& p, double c1, double c2)
{
    double in = 0.0;
    double out = 0.0;
    double area = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (region[i] != 0) {
            in += (f[i] - c1) * (f[i] - c1);
            area += 1.0;
        } else {
            out += (f[i] - c2) * (f[i] - c2);
        }
    }
    return p.mu * static_cast<double>(boundary_pairs(region)) + p.nu * area + p.lambda1 * in + p.lambda2 * out;
}

std::pair<double, double> region_means(const Grid<double>& f, const BinaryMask& region)
{
    double s1 = 0.0;
    double s2 = 0.0;
    double n1 = 0.0;
    double n2 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (region[i] != 0) {
            s1 += f[i];
            n1 += 1.0;
        } else {
            s2 += f[i];
            n2 += 1.0;
        }
    }
    return {n1 > 0 ? s1 / n1 : 0.0, n2 > 0 ? s2 / n2 : 0.0};
}

} // namespace

void ChanVeseParams::validate() const
{
    if (!(mu > 0.0) || !(lambda1 > 0.0) || !(lambda2 > 0.0)) {
        throw InvalidInput("chan-vese: mu, lambda1 and lambda2 must be positive");
    }
    if (!(nu >= 0.0)) {
        throw InvalidInput("chan-vese: nu must be non-negative");
    }
    if (max_iter < 1) {
        throw InvalidInput("chan-vese: max_iter must be at least 1");
    }
    if (seed_radius < 0 || tol < 0.0) {
        throw InvalidInput("chan-vese: seed_radius and tol must be non-negative");
    }
}

double chan_vese_energy(const Image& img, const BinaryMask& region, const ChanVeseParams& params, double c1, double c2)
{
    if (!region.same_shape(img.width(), img.height())) {
        throw InvalidInput("chan-vese energy: region and image dimensions differ");
    }
    return energy_on(gray_grid(img), region, params, c1, c2);
}

double chan_vese_energy(const Image& img, const BinaryMask& region, const ChanVeseParams& params)
{
    if (!region.same_shape(img.width(), img.height())) {
        throw InvalidInput("chan-vese energy: region and image dimensions differ");
    }
    const Grid<double> f = gray_grid(img);
    const auto [c1, c2] = region_means(f, region);
    return energy_on(f, region, params, c1, c2);
}

ChanVeseResult chan_vese_segment(const Image& img, std::span<const Pixel> seeds, const ChanVeseParams& params)
{
    params.validate();
    if (seeds.empty()) {
        throw InvalidInput("chan-vese: at least one seed pixel is required");
    }
    for (const Pixel& s : seeds) {
        if (!img.contains(s.x, s.y)) {
            throw InvalidInput("chan-vese: seed (" + std::to_string(s.x) + "," + std::to_string(s.y)
                               + ") lies outside the image");
        }
    }
    const int w = img.width();
    const int h = img.height();
    const Grid<double> f = gray_grid(img);

    BinaryMask region(w, h, 0);
    const int r = params.seed_radius;
    for (const Pixel& s : seeds) {
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                if (dx * dx + dy * dy <= r * r && region.contains(s.x + dx, s.y + dy)) {
                    region(s.x + dx, s.y + dy) = 1;
                }
            }
        }
    }

    Phase inside;
    Phase outside;
    for (std::size_t i = 0; i < f.size(); ++i) {
        (region[i] != 0 ? inside : outside).add(f[i]);
    }

    ChanVeseResult result;
    double energy = energy_on(f, region, params, inside.mean, outside.mean);
    result.energy_trace.push_back(energy);

    // Flips whose exact gain is below this are rounding noise.
    constexpr double kMinGain = 1e-12;

    int sweep = 0;
    for (; sweep < params.max_iter; ++sweep) {
        const bool forward = sweep % 2 == 0;
        std::size_t flips = 0;
        for (int k = 0; k < w * h; ++k) {
            const int idx = forward ? k : w * h - 1 - k;
            const int x = idx % w;
            const int y = idx / w;
            const std::uint8_t cur = region(x, y);
            int same = 0;
            int diff = 0;
            for (int n = 0; n < 4; ++n) {
                const int nx = x + kDx[n];
                const int ny = y + kDy[n];
                if (!region.contains(nx, ny)) {
                    continue;
                }
                (region(nx, ny) == cur ? same : diff) += 1;
            }
            if (diff == 0) {
                continue; // not on the contour band
            }
            const double v = f(x, y);
            double delta = params.mu * static_cast<double>(same - diff);
            if (cur != 0) {
                delta += -params.nu + params.lambda1 * inside.remove_cost(v) + params.lambda2 * outside.add_cost(v);
            } else {
                delta += params.nu + params.lambda1 * inside.add_cost(v) + params.lambda2 * outside.remove_cost(v);
            }
            if (delta < -kMinGain) {
                if (cur != 0) {
                    inside.remove(v);
                    outside.add(v);
                } else {
                    outside.remove(v);
                    inside.add(v);
                }
                region(x, y) = cur != 0 ? 0 : 1;
                ++flips;
            }
        }
        if (flips == 0) {
            break;
        }
        // Recompute from scratch so drift in the running means never
        // accumulates into the reported energy.
        const auto [c1, c2] = region_means(f, region);
        inside.mean = c1;
        outside.mean = c2;
        const double next = energy_on(f, region, params, c1, c2);
        result.energy_trace.push_back(next);
        const double decrease = energy - next;
        energy = next;
        if (params.tol > 0.0 && decrease <= params.tol * std::abs(energy)) {
            ++sweep;
            break;
        }
    }
    result.iterations = sweep;

    const auto [c1, c2] = region_means(f, region);
    result.c1 = c1;
    result.c2 = c2;
    const std::size_t area = count(region);
    if (area == 0) {
        throw DegenerateResult(sweep, "chan-vese: contour collapsed to the empty set after "
                                          + std::to_string(sweep) + " sweeps");
    }
    bool has_seed = false;
    for (const Pixel& s : seeds) {
        has_seed = has_seed || region(s.x, s.y) != 0;
    }
    if (!has_seed) {
        throw DegenerateResult(sweep, "chan-vese: final region contains no seed after " + std::to_string(sweep)
                                          + " sweeps");
    }
    if (area < region.size() && std::abs(c1 - c2) < 1e-9) {
        throw DegenerateResult(sweep, "chan-vese: no contrast between inside and outside after "
                                          + std::to_string(sweep) + " sweeps");
    }
    result.region = std::move(region);
    return result;
}

} // namespace vellum
