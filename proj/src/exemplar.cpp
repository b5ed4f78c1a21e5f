#include "vellum/exemplar.hpp"

#include <algorithm>
#include <cmath>

namespace vellum {
namespace {

struct Level {
    Image image;
    BinaryMask domain;
    std::optional<TargetConstraint> constraint;
};

// 2x2 box average; odd trailing rows/columns average whatever children exist.
Image downsample(const Image& img)
{
    const int w = (img.width() + 1) / 2;
    const int h = (img.height() + 1) / 2;
    const int nc = img.channels();
    Image out(w, h, nc, img.color_space());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < nc; ++c) {
                double s = 0.0;
                int n = 0;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        if (img.contains(2 * x + dx, 2 * y + dy)) {
                            s += img.at(2 * x + dx, 2 * y + dy, c);
                            ++n;
                        }
                    }
                }
                out.at(x, y, c) = s / n;
            }
        }
    }
    return out;
}

template <typename T, typename Reduce>
Grid<T> reduce2(const Grid<T>& g, Reduce reduce)
{
    Grid<T> out((g.width() + 1) / 2, (g.height() + 1) / 2);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            T acc = g(2 * x, 2 * y);
            for (int k = 1; k < 4; ++k) {
                const int cx = 2 * x + (k & 1);
                const int cy = 2 * y + (k >> 1);
                if (g.contains(cx, cy)) {
                    acc = reduce(acc, g(cx, cy));
                }
            }
            out(x, y) = acc;
        }
    }
    return out;
}

bool has_valid_target(const BinaryMask& domain, int side)
{
    for (int y = 0; y < domain.height(); ++y) {
        for (int x = 0; x < domain.width(); ++x) {
            if (valid_target(domain, {x, y}, side)) {
                return true;
            }
        }
    }
    return false;
}

double max_change(const Image& a, const Image& b, const BinaryMask& domain)
{
    const int nc = a.channels();
    double m = 0.0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (domain(x, y) != 0) {
                for (int c = 0; c < nc; ++c) {
                    m = std::max(m, std::abs(a.at(x, y, c) - b.at(x, y, c)));
                }
            }
        }
    }
    return m;
}

// Coarse NNF mapped onto the finer grid: shift of the parent pixel, doubled.
ShiftMap upsample_nnf(const ShiftMap& coarse, const BinaryMask& fine_domain, int side)
{
    ShiftMap fine(fine_domain, side);
    for (std::size_t i = 0; i < fine.size(); ++i) {
        const Pixel p = fine.pixel(i);
        const int j = coarse.index_of(p.x / 2, p.y / 2);
        if (j >= 0) {
            const Pixel s = coarse.shift(static_cast<std::size_t>(j));
            fine.set_target(i, {p.x + 2 * s.x, p.y + 2 * s.y});
        } else {
            fine.set_target(i, {-1, -1}); // invalid: patchmatch re-draws it
        }
    }
    return fine;
}

} // namespace

ExemplarResult inpaint_exemplar(const Image& img, const BinaryMask& domain, const PatchParams& params,
                                const Image* init_image, const TargetConstraint* constraint, const TvParams& tv)
{
    params.validate();
    if (!domain.same_shape(img.width(), img.height())) {
        throw InvalidInput("inpaint_exemplar: mask and image dimensions differ");
    }
    ExemplarResult result;
    if (count(domain) == 0) {
        result.image = img;
        return result;
    }
    Image fill;
    if (init_image != nullptr) {
        if (init_image->width() != img.width() || init_image->height() != img.height()
            || init_image->channels() != img.channels()) {
            throw InvalidInput("inpaint_exemplar: init image shape differs");
        }
        fill = *init_image;
    } else {
        fill = tv_inpaint(img, domain, tv).image;
    }
    // Only D comes from the initialisation; the rest stays exactly img.
    Image start = img;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (domain(x, y) != 0) {
                for (int c = 0; c < img.channels(); ++c) {
                    start.at(x, y, c) = fill.at(x, y, c);
                }
            }
        }
    }

    const int side = params.patch_side;
    std::vector<Level> levels;
    levels.push_back({start, domain, constraint != nullptr ? std::optional(*constraint) : std::nullopt});
    while (static_cast<int>(levels.size()) < params.scales) {
        const Level& fine = levels.back();
        Level coarse{downsample(fine.image),
                     reduce2(fine.domain, [](std::uint8_t a, std::uint8_t b) { return std::max(a, b); }),
                     std::nullopt};
        if (coarse.image.width() < side || coarse.image.height() < side || !has_valid_target(coarse.domain, side)) {
            break;
        }
        if (fine.constraint) {
            coarse.constraint = TargetConstraint{
                reduce2(fine.constraint->target_depth, [](double a, double b) { return std::min(a, b); }),
                reduce2(fine.constraint->min_depth, [](double a, double b) { return std::max(a, b); })};
        }
        levels.push_back(std::move(coarse));
    }
    result.scales_used = static_cast<int>(levels.size());

    Image u;
    ShiftMap nnf;
    for (int li = static_cast<int>(levels.size()) - 1; li >= 0; --li) {
        const Level& level = levels[static_cast<std::size_t>(li)];
        const TargetConstraint* lc = level.constraint ? &*level.constraint : nullptr;
        std::optional<ShiftMap> init;
        Image cur = level.image;
        if (li + 1 < static_cast<int>(levels.size())) {
            for (int y = 0; y < cur.height(); ++y) {
                for (int x = 0; x < cur.width(); ++x) {
                    if (level.domain(x, y) != 0) {
                        for (int c = 0; c < cur.channels(); ++c) {
                            cur.at(x, y, c) = u.at(x / 2, y / 2, c);
                        }
                    }
                }
            }
            init = upsample_nnf(nnf, level.domain, side);
        }

        PatchParams pp = params;
        pp.seed = params.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(li + 1);
        if (init) {
            // Rebuild D from the upsampled field before searching, so the
            // fine level starts from full-resolution exemplar content rather
            // than blocky coarse pixels. Entries without a parent are drawn
            // at random and get little weight in the vote.
            PatchParams fill_only = pp;
            fill_only.propagation_iters = 0;
            init = patchmatch_nnf(cur, level.domain, &*init, fill_only, lc);
            cur = reconstruct(cur, level.domain, *init);
        }
        nnf = patchmatch_nnf(cur, level.domain, init ? &*init : nullptr, pp, lc);
        std::vector<double> trace{nnf_energy(cur, nnf)};
        // Alternate reconstruct / NNF. A reconstruction that would raise the
        // energy at the current field is rejected and the scale ends, so the
        // per-scale trace never increases.
        for (int outer = 0; outer < params.max_outer; ++outer) {
            Image next = reconstruct(cur, level.domain, nnf);
            const double e_next = nnf_energy(next, nnf);
            if (e_next > trace.back()) {
                break;
            }
            const double change = max_change(cur, next, level.domain);
            cur = std::move(next);
            pp.seed += 1;
            nnf = patchmatch_nnf(cur, level.domain, &nnf, pp, lc);
            trace.push_back(nnf_energy(cur, nnf));
            if (change < params.change_threshold) {
                break;
            }
        }
        result.energy_per_scale.push_back(std::move(trace));
        u = std::move(cur);
    }
    result.image = std::move(u);
    result.nnf = std::move(nnf);
    return result;
}

} // namespace vellum
