#include "vellum/exemplar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace vellum {
namespace {

// Patch SSD between centres a and b, both known to be in range. Returns a
// value > bound as soon as the partial sum exceeds it.
double ssd_bounded(const Image& img, Pixel a, Pixel b, int half, double bound)
{
    const int nc = img.channels();
    const int row_len = (2 * half + 1) * nc;
    const auto data = img.data();
    double s = 0.0;
    for (int dy = -half; dy <= half; ++dy) {
        const double* pa = data.data() + img.offset(a.x - half, a.y + dy);
        const double* pb = data.data() + img.offset(b.x - half, b.y + dy);
        for (int k = 0; k < row_len; ++k) {
            const double d = pa[k] - pb[k];
            s += d * d;
        }
        if (s > bound) {
            return s;
        }
    }
    return s;
}

double ssd(const Image& img, Pixel a, Pixel b, int half)
{
    return ssd_bounded(img, a, b, half, std::numeric_limits<double>::infinity());
}

double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi)
{
    const double span = static_cast<double>(hi - lo + 1);
    return lo + std::min(hi - lo, static_cast<int>(uniform01(rng) * span));
}

void check_shapes(const Image& img, const BinaryMask& domain, int side)
{
    if (!domain.same_shape(img.width(), img.height())) {
        throw InvalidInput("patch: mask and image dimensions differ");
    }
    if (side < 3 || side % 2 == 0) {
        throw InvalidInput("patch: side must be odd and at least 3");
    }
    if (img.width() < side || img.height() < side) {
        throw InvalidInput("patch: image is smaller than one patch");
    }
}

// 1 where a full patch centred there lies inside the image and outside D.
BinaryMask target_mask(const BinaryMask& domain, int side)
{
    const int half = side / 2;
    const int w = domain.width();
    const int h = domain.height();
    std::vector<int> sum(static_cast<std::size_t>((w + 1) * (h + 1)), 0);
    auto at = [&](int x, int y) -> int& { return sum[static_cast<std::size_t>(y * (w + 1) + x)]; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            at(x + 1, y + 1) = at(x, y + 1) + at(x + 1, y) - at(x, y) + (domain(x, y) != 0 ? 1 : 0);
        }
    }
    BinaryMask out(w, h, 0);
    for (int y = half; y < h - half; ++y) {
        for (int x = half; x < w - half; ++x) {
            const int n = at(x + half + 1, y + half + 1) - at(x - half, y + half + 1) - at(x + half + 1, y - half)
                + at(x - half, y - half);
            out(x, y) = n == 0 ? 1 : 0;
        }
    }
    return out;
}

std::vector<Pixel> valid_targets(const BinaryMask& valid)
{
    std::vector<Pixel> out;
    for (int y = 0; y < valid.height(); ++y) {
        for (int x = 0; x < valid.width(); ++x) {
            if (valid(x, y) != 0) {
                out.push_back({x, y});
            }
        }
    }
    return out;
}

bool better(double d, Pixel t, double best_d, Pixel best_t)
{
    return d < best_d || (d == best_d && t < best_t);
}

} // namespace

void PatchParams::validate() const
{
    if (patch_side < 3 || patch_side % 2 == 0) {
        throw InvalidInput("patch_side must be odd and at least 3");
    }
    if (propagation_iters < 0 || search_samples < 1 || scales < 1 || max_outer < 1 || !(change_threshold >= 0.0)) {
        throw InvalidInput("invalid exemplar parameters");
    }
}

ShiftMap::ShiftMap(const BinaryMask& domain, int patch_side)
    : width_(domain.width()), height_(domain.height()), side_(patch_side), index_(domain.width(), domain.height(), -1)
{
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (domain(x, y) != 0) {
                index_(x, y) = static_cast<int>(pixels_.size());
                pixels_.push_back({x, y});
            }
        }
    }
    shifts_.assign(pixels_.size(), Pixel{});
}

Pixel ShiftMap::center(std::size_t i) const
{
    const int half = side_ / 2;
    const Pixel p = pixels_[i];
    return {std::clamp(p.x, half, std::max(half, width_ - 1 - half)),
            std::clamp(p.y, half, std::max(half, height_ - 1 - half))};
}

double patch_distance(const Image& img, Pixel a, Pixel b, int side)
{
    if (side < 1 || side % 2 == 0) {
        throw InvalidInput("patch_distance: side must be odd");
    }
    const int half = side / 2;
    auto inside = [&](Pixel p) {
        return p.x - half >= 0 && p.y - half >= 0 && p.x + half < img.width() && p.y + half < img.height();
    };
    if (!inside(a) || !inside(b)) {
        throw InvalidInput("patch_distance: patch leaves the image");
    }
    return ssd(img, a, b, half);
}

bool valid_target(const BinaryMask& domain, Pixel t, int side)
{
    const int half = side / 2;
    if (t.x < half || t.y < half || t.x >= domain.width() - half || t.y >= domain.height() - half) {
        return false;
    }
    for (int y = t.y - half; y <= t.y + half; ++y) {
        for (int x = t.x - half; x <= t.x + half; ++x) {
            if (domain(x, y) != 0) {
                return false;
            }
        }
    }
    return true;
}

double nnf_energy(const Image& img, const ShiftMap& nnf)
{
    const int half = nnf.patch_side() / 2;
    double e = 0.0;
    for (std::size_t i = 0; i < nnf.size(); ++i) {
        e += ssd(img, nnf.center(i), nnf.target(i), half);
    }
    return e;
}

void check_nnf(const BinaryMask& domain, const ShiftMap& nnf, const TargetConstraint* constraint)
{
    for (std::size_t i = 0; i < nnf.size(); ++i) {
        const Pixel t = nnf.target(i);
        if (!valid_target(domain, t, nnf.patch_side())) {
            throw InvalidInput("nnf entry " + std::to_string(i) + " targets an invalid centre (" + std::to_string(t.x)
                               + "," + std::to_string(t.y) + ")");
        }
        if (constraint != nullptr && !constraint->allows(nnf.pixel(i), t)) {
            throw InvalidInput("nnf entry " + std::to_string(i) + " violates the target constraint");
        }
    }
}

ShiftMap brute_force_nnf(const Image& img, const BinaryMask& domain, int patch_side, const TargetConstraint* constraint)
{
    if (img.width() > kBruteForceMaxSide || img.height() > kBruteForceMaxSide) {
        throw InvalidInput("brute_force_nnf: refusing images larger than 128x128");
    }
    check_shapes(img, domain, patch_side);
    const int half = patch_side / 2;
    const std::vector<Pixel> targets = valid_targets(target_mask(domain, patch_side));
    ShiftMap nnf(domain, patch_side);
    for (std::size_t i = 0; i < nnf.size(); ++i) {
        const Pixel c = nnf.center(i);
        double best = std::numeric_limits<double>::infinity();
        std::optional<Pixel> arg;
        for (const Pixel& t : targets) { // row-major, so strict < keeps the lexicographic first
            if (constraint != nullptr && !constraint->allows(nnf.pixel(i), t)) {
                continue;
            }
            const double d = ssd_bounded(img, c, t, half, best);
            if (d < best) {
                best = d;
                arg = t;
            }
        }
        if (!arg) {
            throw InfeasibleDomain("brute_force_nnf: no valid target patch for pixel ("
                                   + std::to_string(nnf.pixel(i).x) + "," + std::to_string(nnf.pixel(i).y) + ")");
        }
        nnf.set_target(i, *arg);
    }
    return nnf;
}

ShiftMap patchmatch_nnf(const Image& img, const BinaryMask& domain, const ShiftMap* init, const PatchParams& params,
                        const TargetConstraint* constraint, std::vector<double>* energy_trace)
{
    params.validate();
    check_shapes(img, domain, params.patch_side);
    const int side = params.patch_side;
    const int half = side / 2;
    const int w = img.width();
    const int h = img.height();

    ShiftMap nnf(domain, side);
    if (nnf.size() == 0) {
        throw InvalidInput("patchmatch: inpainting domain is empty");
    }
    const BinaryMask valid = target_mask(domain, side);
    const std::vector<Pixel> targets = valid_targets(valid);
    if (targets.empty()) {
        throw InfeasibleDomain("patchmatch: no valid target patch exists");
    }
    std::mt19937_64 rng(params.seed);

    auto allowed = [&](std::size_t i, Pixel t) {
        return t.x >= 0 && t.y >= 0 && t.x < w && t.y < h && valid(t.x, t.y) != 0
            && (constraint == nullptr || constraint->allows(nnf.pixel(i), t));
    };
    auto random_target = [&](std::size_t i) -> Pixel {
        for (int attempt = 0; attempt < 64; ++attempt) {
            const Pixel t = targets[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(targets.size()) - 1))];
            if (constraint == nullptr || constraint->allows(nnf.pixel(i), t)) {
                return t;
            }
        }
        for (const Pixel& t : targets) {
            if (constraint->allows(nnf.pixel(i), t)) {
                return t;
            }
        }
        throw InfeasibleDomain("patchmatch: no allowed target patch for pixel (" + std::to_string(nnf.pixel(i).x) + ","
                               + std::to_string(nnf.pixel(i).y) + ")");
    };

    const bool use_init = init != nullptr && init->width() == w && init->height() == h;
    std::vector<double> cost(nnf.size());
    for (std::size_t i = 0; i < nnf.size(); ++i) {
        Pixel t{};
        bool have = false;
        if (use_init) {
            const Pixel p = nnf.pixel(i);
            const int j = init->index_of(p.x, p.y);
            if (j >= 0) {
                t = init->target(static_cast<std::size_t>(j));
                have = allowed(i, t);
            }
        }
        if (!have) {
            t = random_target(i);
        }
        nnf.set_target(i, t);
        cost[i] = ssd(img, nnf.center(i), t, half);
    }

    auto total = [&] {
        double s = 0.0;
        for (double c : cost) {
            s += c;
        }
        return s;
    };
    if (energy_trace != nullptr) {
        energy_trace->push_back(total());
    }

    auto try_candidate = [&](std::size_t i, Pixel cand) {
        if (!allowed(i, cand)) {
            return;
        }
        const Pixel cur = nnf.target(i);
        if (cand == cur) {
            return;
        }
        const double d = ssd_bounded(img, nnf.center(i), cand, half, cost[i]);
        if (better(d, cand, cost[i], cur)) {
            cost[i] = d;
            nnf.set_target(i, cand);
        }
    };

    const int max_radius = std::max(w, h);
    for (int iter = 0; iter < params.propagation_iters; ++iter) {
        const bool forward = iter % 2 == 0;
        const int step = forward ? -1 : 1; // neighbours already visited this pass
        for (std::size_t k = 0; k < nnf.size(); ++k) {
            const std::size_t i = forward ? k : nnf.size() - 1 - k;
            const Pixel p = nnf.pixel(i);
            const Pixel c = nnf.center(i);
            const Pixel nbrs[2] = {{p.x + step, p.y}, {p.x, p.y + step}};
            for (const Pixel& q : nbrs) {
                if (!domain.contains(q.x, q.y)) {
                    continue;
                }
                const int j = nnf.index_of(q.x, q.y);
                if (j < 0) {
                    continue;
                }
                const auto uj = static_cast<std::size_t>(j);
                const Pixel cq = nnf.center(uj);
                const Pixel tq = nnf.target(uj);
                try_candidate(i, {c.x + tq.x - cq.x, c.y + tq.y - cq.y});
            }
            // Search windows are clipped to the range of full-patch centres.
            for (int r = max_radius; r >= 1; r /= 2) {
                const Pixel cur = nnf.target(i);
                const int x0 = std::max(half, cur.x - r);
                const int x1 = std::min(w - 1 - half, cur.x + r);
                const int y0 = std::max(half, cur.y - r);
                const int y1 = std::min(h - 1 - half, cur.y + r);
                for (int k = 0; k < params.search_samples; ++k) {
                    try_candidate(i, {uniform_int(rng, x0, x1), uniform_int(rng, y0, y1)});
                }
            }
        }
        if (energy_trace != nullptr) {
            energy_trace->push_back(total());
        }
    }
    return nnf;
}

Image reconstruct(const Image& img, const BinaryMask& domain, const ShiftMap& nnf)
{
    if (!domain.same_shape(img.width(), img.height()) || nnf.width() != img.width() || nnf.height() != img.height()) {
        throw InvalidInput("reconstruct: shapes differ");
    }
    const int half = nnf.patch_side() / 2;
    const int nc = img.channels();
    const auto unc = static_cast<std::size_t>(nc);

    struct Vote {
        double d2;
        std::size_t source; // offset of the voting pixel in img
    };
    std::vector<std::vector<Vote>> votes(nnf.size());
    for (std::size_t i = 0; i < nnf.size(); ++i) {
        const Pixel c = nnf.center(i);
        const Pixel t = nnf.target(i);
        const double d2 = ssd(img, c, t, half);
        for (int dy = -half; dy <= half; ++dy) {
            for (int dx = -half; dx <= half; ++dx) {
                const int j = nnf.index_of(c.x + dx, c.y + dy);
                if (j >= 0) {
                    votes[static_cast<std::size_t>(j)].push_back({d2, img.offset(t.x + dx, t.y + dy)});
                }
            }
        }
    }

    Image out = img;
    std::vector<double> dists;
    std::vector<double> acc(unc);
    for (std::size_t j = 0; j < nnf.size(); ++j) {
        const auto& v = votes[j];
        dists.clear();
        for (const Vote& vote : v) {
            dists.push_back(std::sqrt(vote.d2));
        }
        const std::size_t q = std::min(dists.size() - 1, static_cast<std::size_t>(std::ceil(0.75 * static_cast<double>(dists.size()))) - 1);
        std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(q), dists.end());
        const double sigma = dists[q];
        std::fill(acc.begin(), acc.end(), 0.0);
        double wsum = 0.0;
        for (const Vote& vote : v) {
            const double wgt = sigma > 0.0 ? std::exp(-vote.d2 / (2.0 * sigma * sigma)) : (vote.d2 == 0.0 ? 1.0 : 0.0);
            wsum += wgt;
            for (std::size_t c = 0; c < unc; ++c) {
                acc[c] += wgt * img.data()[vote.source + c];
            }
        }
        const Pixel p = nnf.pixel(j);
        for (std::size_t c = 0; c < unc; ++c) {
            out.at(p.x, p.y, static_cast<int>(c)) = acc[c] / wsum;
        }
    }
    out.clamp01();
    return out;
}

} // namespace vellum
