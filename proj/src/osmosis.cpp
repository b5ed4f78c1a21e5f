#include "vellum/osmosis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <limits>
#include <string>
#include <tuple>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "vellum/parallel.hpp"

namespace vellum {
namespace {

bool in_domain(Label l)
{
    return l != Label::Keep && l != Label::DirichletRim;
}

enum class Link { None, Coupled, Data };

// How the link p-q (p inside D) enters the system.
Link link_kind(Label p, Label q, BoundaryMode bc)
{
    if (in_domain(q)) {
        const bool wall = (p == Label::NeumannEdge) != (q == Label::NeumannEdge);
        return wall ? Link::None : Link::Coupled;
    }
    switch (bc) {
    case BoundaryMode::Dirichlet:
        return Link::Data;
    case BoundaryMode::Mixed:
        return q == Label::DirichletRim ? Link::Data : Link::None;
    case BoundaryMode::Neumann:
        return Link::None;
    }
    return Link::None;
}

struct Neighbour {
    int dx, dy;
};
constexpr Neighbour kNeighbours[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

// Drift oriented from (x, y) towards its neighbour (x+dx, y+dy).
double drift_towards(const DriftField& d, int x, int y, Neighbour n)
{
    if (n.dx == 1) {
        return d.d1(x, y);
    }
    if (n.dx == -1) {
        return -d.d1(x - 1, y);
    }
    if (n.dy == 1) {
        return d.d2(x, y);
    }
    return -d.d2(x, y - 1);
}

void check_problem(const OsmosisProblem& p)
{
    const int w = p.base.width();
    const int h = p.base.height();
    if (!p.annotation.same_shape(w, h)) {
        throw InvalidInput("osmosis: annotation and base dimensions differ");
    }
    if (p.drift.width() != w || p.drift.height() != h || !p.drift.d1.same_shape(std::max(w - 1, 0), h)) {
        throw InvalidInput("osmosis: drift field dimensions differ");
    }
    for (double v : p.drift.d1.values()) {
        if (!std::isfinite(v)) {
            throw InvalidInput("osmosis: non-finite drift");
        }
    }
    for (double v : p.drift.d2.values()) {
        if (!std::isfinite(v)) {
            throw InvalidInput("osmosis: non-finite drift");
        }
    }
}

struct DisjointSets {
    std::vector<int> parent;
    explicit DisjointSets(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a)
    {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    }
    void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

struct PinnedLink {
    int unknown; // index of the D pixel
    Pixel outside;
};

} // namespace

DriftField::DriftField(int width, int height)
    : d1(std::max(width - 1, 0), height, 0.0), d2(width, std::max(height - 1, 0), 0.0)
{
}

double DriftField::max_abs() const
{
    double m = 0.0;
    for (double v : d1.values()) {
        m = std::max(m, std::abs(v));
    }
    for (double v : d2.values()) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

DriftField canonical_drift(const Grid<double>& intensity)
{
    const int w = intensity.width();
    const int h = intensity.height();
    DriftField d(w, h);
    auto g = [&](int x, int y) { return std::max(intensity(x, y), kOsmosisEpsilon); };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            const double a = g(x, y);
            const double b = g(x + 1, y);
            d.d1(x, y) = 2.0 * (b - a) / (b + a);
        }
    }
    for (int y = 0; y + 1 < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double a = g(x, y);
            const double b = g(x, y + 1);
            d.d2(x, y) = 2.0 * (b - a) / (b + a);
        }
    }
    return d;
}

DriftField canonical_drift(const Image& single_channel)
{
    if (single_channel.channels() != 1) {
        throw InvalidInput("canonical_drift: expected a single-channel image");
    }
    return canonical_drift(single_channel.channel(0));
}

DriftField assemble_drift(const DriftField& base, const DriftField& foreign, const AnnotationMask& annotation)
{
    const int w = annotation.width();
    const int h = annotation.height();
    if (base.width() != w || base.height() != h || foreign.width() != w || foreign.height() != h) {
        throw InvalidInput("assemble_drift: dimensions differ");
    }
    DriftField out(w, h);
    auto mix = [&](Label a, Label b, double vb, double vf) {
        if (a == Label::ZeroDriftEdge || b == Label::ZeroDriftEdge) {
            return 0.0;
        }
        const int inside = (in_domain(a) ? 1 : 0) + (in_domain(b) ? 1 : 0);
        return inside == 2 ? vf : inside == 0 ? vb : 0.5 * (vb + vf);
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            out.d1(x, y) = mix(annotation(x, y), annotation(x + 1, y), base.d1(x, y), foreign.d1(x, y));
        }
    }
    for (int y = 0; y + 1 < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.d2(x, y) = mix(annotation(x, y), annotation(x, y + 1), base.d2(x, y), foreign.d2(x, y));
        }
    }
    return out;
}

OsmosisSolution solve_elliptic(const OsmosisProblem& problem)
{
    check_problem(problem);
    const int w = problem.base.width();
    const int h = problem.base.height();
    const auto& ann = problem.annotation;

    Grid<int> index(w, h, -1);
    std::vector<Pixel> unknowns;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (in_domain(ann(x, y))) {
                index(x, y) = static_cast<int>(unknowns.size());
                unknowns.push_back({x, y});
            }
        }
    }
    OsmosisSolution sol;
    sol.field = problem.base;
    sol.unknowns = unknowns.size();
    if (unknowns.empty()) {
        return sol;
    }
    const int n = static_cast<int>(unknowns.size());

    // Components over coupled links; those without a data link get pinned.
    DisjointSets sets(n);
    std::vector<char> has_data(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        const Pixel p = unknowns[static_cast<std::size_t>(i)];
        for (const Neighbour nb : kNeighbours) {
            const int qx = p.x + nb.dx;
            const int qy = p.y + nb.dy;
            if (!ann.contains(qx, qy)) {
                continue;
            }
            const Link k = link_kind(ann(p.x, p.y), ann(qx, qy), problem.bc);
            if (k == Link::Coupled) {
                sets.unite(i, index(qx, qy));
            } else if (k == Link::Data) {
                has_data[static_cast<std::size_t>(i)] = 1;
            }
        }
    }
    std::vector<char> root_has_data(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        if (has_data[static_cast<std::size_t>(i)] != 0) {
            root_has_data[static_cast<std::size_t>(sets.find(i))] = 1;
        }
    }
    // Candidate pin per root: (is_keep, outside pixel, unknown). Smallest wins.
    struct Pin {
        bool keep;
        Pixel outside;
        int unknown;
    };
    std::vector<std::optional<Pin>> pins(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int r = sets.find(i);
        if (root_has_data[static_cast<std::size_t>(r)] != 0) {
            continue;
        }
        const Pixel p = unknowns[static_cast<std::size_t>(i)];
        for (const Neighbour nb : kNeighbours) {
            const int qx = p.x + nb.dx;
            const int qy = p.y + nb.dy;
            if (!ann.contains(qx, qy) || in_domain(ann(qx, qy))) {
                continue;
            }
            const Pin cand{ann(qx, qy) == Label::Keep, {qx, qy}, i};
            auto& cur = pins[static_cast<std::size_t>(r)];
            if (!cur || std::tie(cand.keep, cand.outside, cand.unknown) < std::tie(cur->keep, cur->outside, cur->unknown)) {
                cur = cand;
            }
        }
    }
    std::vector<PinnedLink> pinned;
    for (int i = 0; i < n; ++i) {
        if (sets.find(i) != i || root_has_data[static_cast<std::size_t>(i)] != 0) {
            continue;
        }
        const auto& pin = pins[static_cast<std::size_t>(i)];
        if (!pin) {
            const Pixel p = unknowns[static_cast<std::size_t>(i)];
            throw IllPosed("osmosis: component of D containing (" + std::to_string(p.x) + "," + std::to_string(p.y)
                           + ") has no outside neighbour to fix its level");
        }
        pinned.push_back({pin->unknown, pin->outside});
    }
    sol.pinned = static_cast<int>(pinned.size());

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * 5);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    auto add_data_link = [&](int i, Pixel p, Pixel q, Neighbour nb, double& diag) {
        const double d = drift_towards(problem.drift, p.x, p.y, nb);
        diag -= 1.0 + 0.5 * d;
        b[i] -= (1.0 - 0.5 * d) * problem.base(q.x, q.y);
    };
    for (int i = 0; i < n; ++i) {
        const Pixel p = unknowns[static_cast<std::size_t>(i)];
        double diag = 0.0;
        for (const Neighbour nb : kNeighbours) {
            const int qx = p.x + nb.dx;
            const int qy = p.y + nb.dy;
            if (!ann.contains(qx, qy)) {
                continue;
            }
            const Link k = link_kind(ann(p.x, p.y), ann(qx, qy), problem.bc);
            if (k == Link::Coupled) {
                const double d = drift_towards(problem.drift, p.x, p.y, nb);
                diag -= 1.0 + 0.5 * d;
                triplets.emplace_back(i, index(qx, qy), 1.0 - 0.5 * d);
            } else if (k == Link::Data) {
                add_data_link(i, p, {qx, qy}, nb, diag);
            }
        }
        for (const PinnedLink& pl : pinned) {
            if (pl.unknown == i) {
                add_data_link(i, p, pl.outside, {pl.outside.x - p.x, pl.outside.y - p.y}, diag);
            }
        }
        triplets.emplace_back(i, i, diag);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();

    Eigen::VectorXd u;
    if (static_cast<std::size_t>(n) <= kDirectSolverLimit) {
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success) {
            throw NumericalFailure(std::numeric_limits<double>::infinity(),
                                   "osmosis: sparse factorisation failed (" + lu.lastErrorMessage() + ")");
        }
        u = lu.solve(b);
    } else {
        Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> it;
        it.preconditioner().setDroptol(1e-5);
        it.preconditioner().setFillfactor(20);
        it.setTolerance(1e-11);
        it.setMaxIterations(20000);
        it.compute(a);
        if (it.info() != Eigen::Success) {
            throw NumericalFailure(std::numeric_limits<double>::infinity(), "osmosis: preconditioner setup failed");
        }
        u = it.solve(b);
    }
    const double bnorm = b.lpNorm<Eigen::Infinity>();
    const double rnorm = (a * u - b).lpNorm<Eigen::Infinity>();
    sol.residual = bnorm > 0.0 ? rnorm / bnorm : rnorm;
    if (!u.allFinite() || !(sol.residual <= kOsmosisResidualTol)) {
        throw NumericalFailure(sol.residual, "osmosis: residual " + std::to_string(sol.residual) + " above tolerance");
    }
    for (int i = 0; i < n; ++i) {
        const Pixel p = unknowns[static_cast<std::size_t>(i)];
        sol.field(p.x, p.y) = u[i];
    }
    return sol;
}

Grid<double> evolve_parabolic(const OsmosisProblem& problem, const Grid<double>& initial, double step, int n_steps)
{
    check_problem(problem);
    const int w = problem.base.width();
    const int h = problem.base.height();
    if (!initial.same_shape(w, h)) {
        throw InvalidInput("evolve_parabolic: initial state dimensions differ");
    }
    const double bound = 0.25 / (1.0 + problem.drift.max_abs());
    if (!(step > 0.0) || step > bound) {
        throw InvalidInput("evolve_parabolic: step " + std::to_string(step) + " exceeds the stability bound "
                           + std::to_string(bound));
    }
    if (n_steps < 0) {
        throw InvalidInput("evolve_parabolic: negative step count");
    }
    const auto& ann = problem.annotation;

    // Precomputed per-pixel link coefficients: u_p += step * sum(c_q u_q) - step * diag u_p.
    struct Term {
        std::size_t q;
        double coef;
    };
    std::vector<std::size_t> cells;
    std::vector<double> diag;
    std::vector<std::size_t> first{0};
    std::vector<Term> terms;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!in_domain(ann(x, y))) {
                continue;
            }
            double dg = 0.0;
            for (const Neighbour nb : kNeighbours) {
                const int qx = x + nb.dx;
                const int qy = y + nb.dy;
                if (!ann.contains(qx, qy) || link_kind(ann(x, y), ann(qx, qy), problem.bc) == Link::None) {
                    continue;
                }
                const double d = drift_towards(problem.drift, x, y, nb);
                dg += 1.0 + 0.5 * d;
                terms.push_back({initial.index(qx, qy), 1.0 - 0.5 * d});
            }
            cells.push_back(initial.index(x, y));
            diag.push_back(dg);
            first.push_back(terms.size());
        }
    }

    Grid<double> u = problem.base;
    for (std::size_t c : cells) {
        u[c] = initial[c];
    }
    std::vector<double> next(cells.size());
    for (int s = 0; s < n_steps; ++s) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            double acc = -diag[k] * u[cells[k]];
            for (std::size_t t = first[k]; t < first[k + 1]; ++t) {
                acc += terms[t].coef * u[terms[t].q];
            }
            next[k] = u[cells[k]] + step * acc;
        }
        for (std::size_t k = 0; k < cells.size(); ++k) {
            u[cells[k]] = next[k];
        }
    }
    return u;
}

Image osmosis_restore(const Image& rgb, const Image& foreign, const AnnotationMask& annotation)
{
    const int w = rgb.width();
    const int h = rgb.height();
    if (foreign.width() != w || foreign.height() != h || !annotation.same_shape(w, h)) {
        throw InvalidInput("osmosis_restore: image, foreign image and annotation must share dimensions");
    }
    const BinaryMask domain = domain_of(annotation);
    if (count(domain) == 0) {
        return rgb;
    }
    const bool has_rim = std::any_of(annotation.values().begin(), annotation.values().end(),
                                     [](Label l) { return l == Label::DirichletRim; });
    const DriftField foreign_drift = canonical_drift(to_gray(foreign).channel(0));

    const int nc = std::min(rgb.channels(), 3);
    std::vector<Grid<double>> solved(static_cast<std::size_t>(nc));
    parallel_for(nc, [&](int c) {
        OsmosisProblem problem;
        problem.base = rgb.channel(c);
        problem.annotation = annotation;
        problem.drift = assemble_drift(canonical_drift(problem.base), foreign_drift, annotation);
        problem.bc = has_rim ? BoundaryMode::Mixed : BoundaryMode::Dirichlet;
        solved[static_cast<std::size_t>(c)] = solve_elliptic(problem).field;
    });

    Image out = rgb;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (domain(x, y) != 0) {
                for (int c = 0; c < nc; ++c) {
                    out.at(x, y, c) = std::clamp(solved[static_cast<std::size_t>(c)](x, y), 0.0, 1.0);
                }
            }
        }
    }
    return out;
}

} // namespace vellum
