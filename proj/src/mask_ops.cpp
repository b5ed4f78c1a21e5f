#include "vellum/segmentation.hpp"

#include <vector>

namespace vellum {
namespace {

std::vector<Pixel> disc_offsets(int radius)
{
    std::vector<Pixel> out;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) {
                out.push_back({dx, dy});
            }
        }
    }
    return out;
}

} // namespace

BinaryMask dilate(const BinaryMask& mask, int radius)
{
    if (radius <= 0) {
        return mask;
    }
    const auto disc = disc_offsets(radius);
    BinaryMask out(mask.width(), mask.height(), 0);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y) == 0) {
                continue;
            }
            for (const Pixel& o : disc) {
                if (out.contains(x + o.x, y + o.y)) {
                    out(x + o.x, y + o.y) = 1;
                }
            }
        }
    }
    return out;
}

BinaryMask erode(const BinaryMask& mask, int radius)
{
    if (radius <= 0) {
        return mask;
    }
    const auto disc = disc_offsets(radius);
    BinaryMask out(mask.width(), mask.height(), 0);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            bool keep = mask(x, y) != 0;
            for (std::size_t k = 0; keep && k < disc.size(); ++k) {
                const int nx = x + disc[k].x;
                const int ny = y + disc[k].y;
                keep = !mask.contains(nx, ny) || mask(nx, ny) != 0;
            }
            out(x, y) = keep ? 1 : 0;
        }
    }
    return out;
}

BinaryMask close(const BinaryMask& mask, int radius)
{
    return erode(dilate(mask, radius), radius);
}

int label_components(const BinaryMask& mask, Grid<int>& ids)
{
    ids = Grid<int>(mask.width(), mask.height(), -1);
    int next = 0;
    std::vector<Pixel> stack;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y) == 0 || ids(x, y) >= 0) {
                continue;
            }
            ids(x, y) = next;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const Pixel p = stack.back();
                stack.pop_back();
                const Pixel nbrs[4] = {{p.x + 1, p.y}, {p.x - 1, p.y}, {p.x, p.y + 1}, {p.x, p.y - 1}};
                for (const Pixel& q : nbrs) {
                    if (mask.contains(q.x, q.y) && mask(q.x, q.y) != 0 && ids(q.x, q.y) < 0) {
                        ids(q.x, q.y) = next;
                        stack.push_back(q);
                    }
                }
            }
            ++next;
        }
    }
    return next;
}

BinaryMask refine_mask(const BinaryMask& mask, int min_area, int closing_radius)
{
    const BinaryMask closed = close(mask, closing_radius);
    Grid<int> ids;
    const int n = label_components(closed, ids);
    std::vector<std::size_t> area(static_cast<std::size_t>(n), 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= 0) {
            ++area[static_cast<std::size_t>(ids[i])];
        }
    }
    BinaryMask out(mask.width(), mask.height(), 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= 0 && area[static_cast<std::size_t>(ids[i])] >= static_cast<std::size_t>(std::max(min_area, 0))) {
            out[i] = 1;
        }
    }
    return out;
}

double dice(const BinaryMask& a, const BinaryMask& b)
{
    if (!a.same_shape(b)) {
        throw InvalidInput("dice: mask dimensions differ");
    }
    std::size_t both = 0;
    std::size_t na = 0;
    std::size_t nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i] != 0;
        nb += b[i] != 0;
        both += a[i] != 0 && b[i] != 0;
    }
    if (na + nb == 0) {
        return 1.0;
    }
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

} // namespace vellum
