#include "vellum/tv_inpaint.hpp"

#include <algorithm>
#include <cmath>

namespace vellum {
namespace {

double tv_of(const Grid<double>& v)
{
    const int w = v.width();
    const int h = v.height();
    double tv = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = x + 1 < w ? v(x + 1, y) - v(x, y) : 0.0;
            const double gy = y + 1 < h ? v(x, y + 1) - v(x, y) : 0.0;
            tv += std::sqrt(gx * gx + gy * gy);
        }
    }
    return tv;
}

double fidelity_of(const Grid<double>& f, const Grid<double>& v, const BinaryMask& domain)
{
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (domain[i] == 0) {
            s += (f[i] - v[i]) * (f[i] - v[i]);
        }
    }
    return s;
}

struct ChannelSolve {
    Grid<double> v;
    double energy = 0.0;
    int iterations = 0;
};

// Primal-dual iteration on one channel. Every kTvAuditInterval iterations the
// primal iterate is audited and accepted only if it lowers the energy; the
// accepted iterate is returned, so the accepted energies never increase.
template <typename OnAccept>
ChannelSolve solve_channel(const Grid<double>& f, const Grid<double>& init, double offset, const BinaryMask& domain,
                           const TvParams& p, OnAccept&& on_accept)
{
    const int w = f.width();
    const int h = f.height();
    const std::size_t n = f.size();
    // ||grad||^2 <= 8 for forward differences.
    const double tau = 0.99 / std::sqrt(8.0);
    const double sigma = tau;
    const double fid = 2.0 * tau * p.lambda;
    // Energies are evaluated on the uncentred values that will be returned.
    Grid<double> f0 = f;
    for (auto& v : f0.values()) {
        v += offset;
    }
    auto uncentred = [&](const Grid<double>& v) {
        Grid<double> out = v;
        for (auto& s : out.values()) {
            s += offset;
        }
        return out;
    };
    auto energy = [&](const Grid<double>& v) { return tv_of(v) + p.lambda * fidelity_of(f0, v, domain); };

    Grid<double> x = init;
    Grid<double> xbar = init;
    std::vector<double> px(n, 0.0);
    std::vector<double> py(n, 0.0);

    ChannelSolve best{uncentred(init), 0.0, 0};
    best.energy = energy(best.v);
    auto audit = [&] {
        Grid<double> cand = uncentred(x);
        const double e = energy(cand);
        if (e <= best.energy) {
            best.v = std::move(cand);
            best.energy = e;
            on_accept(e);
        }
    };

    int it = 0;
    bool converged = false;
    for (; it < p.max_iter && !converged; ++it) {
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                const std::size_t i = xbar.index(xx, y);
                const double gx = xx + 1 < w ? xbar(xx + 1, y) - xbar(xx, y) : 0.0;
                const double gy = y + 1 < h ? xbar(xx, y + 1) - xbar(xx, y) : 0.0;
                const double qx = px[i] + sigma * gx;
                const double qy = py[i] + sigma * gy;
                const double norm = std::max(1.0, std::sqrt(qx * qx + qy * qy));
                px[i] = qx / norm;
                py[i] = qy / norm;
            }
        }
        double diff2 = 0.0;
        double norm2 = 0.0;
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                const std::size_t i = x.index(xx, y);
                // div = -grad^T with the matching boundary handling
                double div = 0.0;
                if (xx + 1 < w) {
                    div += px[i];
                }
                if (xx > 0) {
                    div -= px[i - 1];
                }
                if (y + 1 < h) {
                    div += py[i];
                }
                if (y > 0) {
                    div -= py[i - static_cast<std::size_t>(w)];
                }
                const double old = x[i];
                double nv = old + tau * div;
                if (domain[i] == 0) {
                    nv = (nv + fid * f[i]) / (1.0 + fid);
                }
                x[i] = nv;
                xbar[i] = 2.0 * nv - old;
                diff2 += (nv - old) * (nv - old);
                norm2 += nv * nv;
            }
        }
        converged = norm2 > 0.0 ? std::sqrt(diff2 / norm2) < p.tol : diff2 == 0.0;
        if ((it + 1) % kTvAuditInterval == 0 || converged || it + 1 == p.max_iter) {
            audit();
        }
    }
    best.iterations = it;
    return best;
}

} // namespace

void TvParams::validate() const
{
    if (!(lambda > 0.0)) {
        throw InvalidInput("tv: lambda must be positive");
    }
    if (max_iter < 1) {
        throw InvalidInput("tv: max_iter must be at least 1");
    }
    if (!(tol >= 0.0)) {
        throw InvalidInput("tv: tol must be non-negative");
    }
}

double tv_energy(const Image& f, const Image& v, const BinaryMask& domain, double lambda)
{
    if (f.width() != v.width() || f.height() != v.height() || f.channels() != v.channels()
        || !domain.same_shape(f.width(), f.height())) {
        throw InvalidInput("tv_energy: shapes differ");
    }
    double e = 0.0;
    for (int c = 0; c < f.channels(); ++c) {
        const Grid<double> vc = v.channel(c);
        e += tv_of(vc) + lambda * fidelity_of(f.channel(c), vc, domain);
    }
    return e;
}

Image fill_with_boundary_mean(const Image& img, const BinaryMask& domain)
{
    Image out = img;
    const int w = img.width();
    const int h = img.height();
    for (int c = 0; c < img.channels(); ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (domain(x, y) != 0) {
                    continue;
                }
                const bool ring = (x > 0 && domain(x - 1, y) != 0) || (x + 1 < w && domain(x + 1, y) != 0)
                    || (y > 0 && domain(x, y - 1) != 0) || (y + 1 < h && domain(x, y + 1) != 0);
                if (ring) {
                    sum += img.at(x, y, c);
                    ++n;
                }
            }
        }
        const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
        for (std::size_t i = 0; i < domain.size(); ++i) {
            if (domain[i] != 0) {
                out.data()[i * static_cast<std::size_t>(img.channels()) + static_cast<std::size_t>(c)] = mean;
            }
        }
    }
    return out;
}

TvResult tv_inpaint(const Image& img, const BinaryMask& domain, const TvParams& params)
{
    params.validate();
    if (!domain.same_shape(img.width(), img.height())) {
        throw InvalidInput("tv_inpaint: mask and image dimensions differ");
    }
    const std::size_t holes = count(domain);
    if (holes == domain.size()) {
        throw InvalidInput("tv_inpaint: inpainting domain covers the whole image, no data term remains");
    }

    const Image init = fill_with_boundary_mean(img, domain);
    TvResult result;
    result.image = init;
    result.energy_trace.push_back(tv_energy(img, init, domain, params.lambda));
    if (holes == 0) {
        result.energy = result.energy_trace.back();
        return result;
    }

    const int nc = img.channels();
    std::vector<Grid<double>> f(static_cast<std::size_t>(nc));
    std::vector<Grid<double>> current(static_cast<std::size_t>(nc));
    std::vector<double> channel_energy(static_cast<std::size_t>(nc), 0.0);
    std::vector<double> offset(static_cast<std::size_t>(nc), 0.0);
    for (int c = 0; c < nc; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        f[uc] = img.channel(c);
        current[uc] = init.channel(c);
        channel_energy[uc] = tv_of(current[uc]) + params.lambda * fidelity_of(f[uc], current[uc], domain);
        // Solve in a frame centred on the known-data mean: the energy is
        // invariant under a common shift, and this makes the relative-change
        // stop (and so the whole iteration) shift-equivariant.
        double sum = 0.0;
        for (std::size_t i = 0; i < domain.size(); ++i) {
            sum += domain[i] == 0 ? f[uc][i] : 0.0;
        }
        offset[uc] = sum / static_cast<double>(domain.size() - holes);
        for (std::size_t i = 0; i < domain.size(); ++i) {
            f[uc][i] -= offset[uc];
            current[uc][i] -= offset[uc];
        }
    }

    // The trace reports the total: accepted energy of the channel being
    // solved plus the current energy of every other channel.
    for (int c = 0; c < nc; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        auto on_accept = [&](double e) {
            channel_energy[uc] = e;
            double total = 0.0;
            for (double ce : channel_energy) {
                total += ce;
            }
            result.energy_trace.push_back(total);
        };
        ChannelSolve solved = solve_channel(f[uc], current[uc], offset[uc], domain, params, on_accept);
        result.iterations = std::max(result.iterations, solved.iterations);
        current[uc] = std::move(solved.v);
        channel_energy[uc] = solved.energy;
    }

    Image out(img.width(), img.height(), nc, img.color_space());
    for (int c = 0; c < nc; ++c) {
        out.set_channel(c, current[static_cast<std::size_t>(c)]);
    }
    out.clamp01();
    result.image = std::move(out);
    result.energy = tv_energy(img, result.image, domain, params.lambda);
    result.energy_trace.push_back(result.energy);
    return result;
}

} // namespace vellum
