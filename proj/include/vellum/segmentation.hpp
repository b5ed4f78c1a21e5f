#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vellum/features.hpp"
#include "vellum/image.hpp"

namespace vellum {

// ---------------------------------------------------------------------------
// Chan-Vese two-phase segmentation
// ---------------------------------------------------------------------------

/// Weights of the piecewise-constant energy
///   mu * Length + nu * Area(inside) + lambda1 * sum_in (f-c1)^2 + lambda2 * sum_out (f-c2)^2
/// on [0,1] gray data. Length counts 4-neighbour pairs with differing labels.
struct ChanVeseParams {
    double mu = 0.02;
    double nu = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    int max_iter = 1000;
    /// Stop once a sweep lowers the energy by less than tol * |E|.
    double tol = 1e-7;
    /// Radius of the initial disc placed on every seed.
    int seed_radius = 5;

    void validate() const;
};

struct ChanVeseResult {
    BinaryMask region;
    double c1 = 0.0;
    double c2 = 0.0;
    int iterations = 0;
    /// Energy of the initial region followed by the energy after every sweep.
    std::vector<double> energy_trace;
};

/// Seeded Chan-Vese by pixel-flip descent: discs around the seeds initialise
/// the region, then sweeps over the contour band flip a pixel's membership
/// whenever that strictly lowers the energy (c1, c2 updated exactly on each
/// flip). Throws InvalidInput on empty/out-of-range seeds and DegenerateResult
/// when the region collapses, loses every seed, or has no contrast (c1 == c2).
ChanVeseResult chan_vese_segment(const Image& img, std::span<const Pixel> seeds, const ChanVeseParams& params = {});

/// Energy of `region` on the gray version of `img` with c1, c2 set to the
/// region means.
double chan_vese_energy(const Image& img, const BinaryMask& region, const ChanVeseParams& params);

/// Same, with caller-supplied constants.
double chan_vese_energy(const Image& img, const BinaryMask& region, const ChanVeseParams& params, double c1, double c2);

// ---------------------------------------------------------------------------
// k-means labelling
// ---------------------------------------------------------------------------

struct KMeansParams {
    int k = 35;
    int restarts = 5;
    std::uint64_t seed = 0;
    int max_iter = 300;
};

struct LabelMap {
    Grid<int> ids;
    int k = 0;
};

struct KMeansResult {
    std::vector<int> assignment;
    /// Row-major, k rows of `dim` values.
    std::vector<double> centroids;
    int k = 0;
    int dim = 0;
    /// Within-cluster sum of squares of the returned clustering.
    double wcss = 0.0;
    std::vector<std::string> warnings;
};

/// Best-of-restarts Lloyd iteration with k-means++ seeding. When fewer than
/// `k` distinct points exist, k is reduced to that count and a warning is
/// recorded. Throws InvalidInput for k < 2.
KMeansResult kmeans(std::span<const double> points, int dim, const KMeansParams& params);

struct LabelResult {
    LabelMap labels;
    std::vector<double> centroids;
    double wcss = 0.0;
    std::vector<std::string> warnings;
};

LabelResult kmeans_label(const FeatureImage& features, const KMeansParams& params);

/// Union of every cluster holding at least `min_overlap` of the training
/// pixels.
BinaryMask propagate_training_labels(const LabelMap& labels, const BinaryMask& training, double min_overlap = 0.05);

// ---------------------------------------------------------------------------
// Morphology
// ---------------------------------------------------------------------------

/// Disc structuring element {(dx,dy) : dx^2 + dy^2 <= r^2}. Pixels outside the
/// image count as background for dilation and foreground for erosion, so a
/// closing never shrinks the mask.
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);
BinaryMask close(const BinaryMask& mask, int radius);

/// 4-connected component ids (-1 for background), numbered in row-major
/// order of their first pixel. Returns the component count.
int label_components(const BinaryMask& mask, Grid<int>& ids);

/// Closing with a disc of `closing_radius`, then removal of 4-connected
/// components smaller than `min_area`.
BinaryMask refine_mask(const BinaryMask& mask, int min_area = 20, int closing_radius = 2);

/// Dice overlap 2|A n B| / (|A| + |B|); 1 for two empty masks.
double dice(const BinaryMask& a, const BinaryMask& b);

} // namespace vellum
