#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vellum/image.hpp"
#include "vellum/tv_inpaint.hpp"

namespace vellum {

struct PatchParams {
    /// Odd patch side (5, 7 and 9 are the usual choices).
    int patch_side = 7;
    int propagation_iters = 12;
    /// Random candidates drawn per search radius.
    int search_samples = 4;
    /// Number of dyadic pyramid levels; reduced automatically when the
    /// coarsest level would be smaller than a patch.
    int scales = 2;
    std::uint64_t seed = 0;
    /// NNF/reconstruct alternations per scale.
    int max_outer = 10;
    /// Alternation stops once the largest change inside D drops below this.
    double change_threshold = 1.0 / 255.0;

    void validate() const;
};

/// Restricts which target centres may serve which query pixels: target t is
/// allowed for query x iff target_depth(t) >= min_depth(x).
struct TargetConstraint {
    Grid<double> target_depth;
    Grid<double> min_depth;

    bool allows(Pixel query, Pixel target) const
    {
        return target_depth(target.x, target.y) >= min_depth(query.x, query.y);
    }
};

/// Nearest-neighbour field over the inpainting domain D. Entry i belongs to
/// the i-th D pixel in row-major order; its patch is centred at
/// `center(i)` (the pixel itself, clamped inward near the image border) and
/// is matched to the patch centred at `target(i) = pixel(i) + shift(i)`.
class ShiftMap {
public:
    ShiftMap() = default;
    ShiftMap(const BinaryMask& domain, int patch_side);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int patch_side() const noexcept { return side_; }
    std::size_t size() const noexcept { return pixels_.size(); }

    Pixel pixel(std::size_t i) const { return pixels_[i]; }
    Pixel center(std::size_t i) const;
    Pixel shift(std::size_t i) const { return shifts_[i]; }
    Pixel target(std::size_t i) const { return {pixels_[i].x + shifts_[i].x, pixels_[i].y + shifts_[i].y}; }
    void set_target(std::size_t i, Pixel t) { shifts_[i] = {t.x - pixels_[i].x, t.y - pixels_[i].y}; }

    /// Entry index of pixel (x, y), or -1 outside D.
    int index_of(int x, int y) const { return index_(x, y); }

    friend bool operator==(const ShiftMap& a, const ShiftMap& b)
    {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.side_ == b.side_ && a.pixels_ == b.pixels_
            && a.shifts_ == b.shifts_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    int side_ = 0;
    Grid<int> index_;
    std::vector<Pixel> pixels_;
    std::vector<Pixel> shifts_;
};

/// Sum over the side x side neighbourhood and all channels of
/// (u(a + z) - u(b + z))^2. Throws InvalidInput if either patch leaves the
/// image or `side` is not odd.
double patch_distance(const Image& img, Pixel a, Pixel b, int side);

/// True when `t` can serve as a target centre: its whole patch lies inside
/// the image and outside D.
bool valid_target(const BinaryMask& domain, Pixel t, int side);

/// Sum of squared patch distances of all entries (the NNF energy).
double nnf_energy(const Image& img, const ShiftMap& nnf);

/// Throws InvalidInput unless every entry targets a valid (and allowed)
/// centre.
void check_nnf(const BinaryMask& domain, const ShiftMap& nnf, const TargetConstraint* constraint = nullptr);

inline constexpr int kBruteForceMaxSide = 128;

/// Exact NNF by exhaustive search; ties go to the smallest (row, col)
/// target. Refuses images larger than 128x128.
ShiftMap brute_force_nnf(const Image& img, const BinaryMask& domain, int patch_side,
                         const TargetConstraint* constraint = nullptr);

/// PatchMatch: alternating-order propagation plus random search with radius
/// max(W,H) halving down to 1 px
/// (params.search_samples draws per radius, clipped to the image), for params.propagation_iters iterations.
/// `init` entries that are not valid are replaced by random valid targets;
/// without `init` every entry starts random. `energy_trace`, when given,
/// receives the NNF energy before the first and after every iteration.
ShiftMap patchmatch_nnf(const Image& img, const BinaryMask& domain, const ShiftMap* init, const PatchParams& params,
                        const TargetConstraint* constraint = nullptr, std::vector<double>* energy_trace = nullptr);

/// Weighted patch vote: every D pixel becomes the Gaussian-weighted mean
/// (sigma = 75th percentile of the voting distances) of the corresponding
/// pixels of the NN patches of all D patches that cover it. Pixels outside
/// D are copied unchanged.
Image reconstruct(const Image& img, const BinaryMask& domain, const ShiftMap& nnf);

struct ExemplarResult {
    Image image;
    int scales_used = 0;
    /// Per scale (coarsest first): NNF energy after each alternation.
    std::vector<std::vector<double>> energy_per_scale;
    ShiftMap nnf;
};

/// Coarse-to-fine exemplar inpainting. D is initialised from `init_image`
/// when given, otherwise by TV inpainting with `tv`.
ExemplarResult inpaint_exemplar(const Image& img, const BinaryMask& domain, const PatchParams& params,
                                const Image* init_image = nullptr, const TargetConstraint* constraint = nullptr,
                                const TvParams& tv = {});

} // namespace vellum
