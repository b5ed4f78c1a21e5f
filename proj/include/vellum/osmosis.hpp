#pragma once

#include <cstddef>

#include "vellum/annotation.hpp"
#include "vellum/image.hpp"

namespace vellum {

/// Drift on the staggered grid. d1(x, y) sits between (x, y) and (x+1, y),
/// d2(x, y) between (x, y) and (x, y+1); both point towards the larger
/// coordinate.
struct DriftField {
    Grid<double> d1; // (width-1) x height
    Grid<double> d2; // width x (height-1)

    DriftField() = default;
    DriftField(int width, int height);

    int width() const noexcept { return d2.width(); }
    int height() const noexcept { return d1.height(); }
    double max_abs() const;

    friend bool operator==(const DriftField&, const DriftField&) = default;
};

inline constexpr double kOsmosisEpsilon = 1e-4;

/// d = 2 (I_q - I_p) / (I_q + I_p) on every link, with I guarded by
/// max(I, 1e-4). Any image is an exact steady state of its own drift under
/// the stencil used below.
DriftField canonical_drift(const Grid<double>& intensity);
DriftField canonical_drift(const Image& single_channel);

/// Foreign drift on links with both ends in D, base drift on links with no
/// end in D, their mean on links crossing the boundary of D; any link
/// touching a ZERO_DRIFT_EDGE pixel is set to 0.
DriftField assemble_drift(const DriftField& base, const DriftField& foreign, const AnnotationMask& annotation);

/// What the solver does with links from D to the outside:
///   dirichlet  every outside neighbour (KEEP or DIRICHLET_RIM) is data;
///   mixed      only DIRICHLET_RIM neighbours are data, KEEP links carry no flux;
///   neumann    no outside link carries flux.
/// Components of D left without data are pinned at their smallest adjacent
/// outside pixel (DIRICHLET_RIM preferred).
enum class BoundaryMode { Dirichlet, Neumann, Mixed };

struct OsmosisProblem {
    /// Single channel; supplies Dirichlet data outside D.
    Grid<double> base;
    AnnotationMask annotation;
    DriftField drift;
    BoundaryMode bc = BoundaryMode::Dirichlet;
};

struct OsmosisSolution {
    /// base outside D, unclamped solution inside.
    Grid<double> field;
    /// Relative residual ||Au - b||_inf / ||b||_inf of the linear solve.
    double residual = 0.0;
    std::size_t unknowns = 0;
    /// Number of components that needed pinning.
    int pinned = 0;
};

inline constexpr std::size_t kDirectSolverLimit = 100000;
inline constexpr double kOsmosisResidualTol = 1e-8;

/// Solves  sum_q [(u_q - u_p) - d_pq (u_p + u_q)/2] = 0  for every p in D,
/// sparse LU up to 1e5 unknowns, ILUT-preconditioned BiCGSTAB above.
/// Throws NumericalFailure when the residual exceeds 1e-8 and IllPosed when
/// a component of D has no outside neighbour at all.
OsmosisSolution solve_elliptic(const OsmosisProblem& problem);

/// Explicit Euler on the same stencil and the same links (no pinning),
/// starting from `initial` (values outside D are taken from base).
/// Throws InvalidInput if step > 0.25 / (1 + max|d|).
Grid<double> evolve_parabolic(const OsmosisProblem& problem, const Grid<double>& initial, double step, int n_steps);

/// Per channel of `rgb`: base = canonical drift of the channel, foreign =
/// canonical drift of `foreign` (infrared, or a user sketch), assembled per
/// annotation and solved on D. Mixed boundary mode when the annotation has
/// a DIRICHLET_RIM pixel, dirichlet otherwise. Pixels outside D are copied.
Image osmosis_restore(const Image& rgb, const Image& foreign, const AnnotationMask& annotation);

} // namespace vellum
