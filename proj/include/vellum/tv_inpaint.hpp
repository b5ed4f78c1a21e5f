#pragma once

#include <vector>

#include "vellum/image.hpp"

namespace vellum {

/// Weights of  sum |grad v|_2 + lambda * sum_{outside D} (f - v)^2.
struct TvParams {
    double lambda = 1000.0;
    int max_iter = 1000;
    /// Relative change ||v_k - v_{k-1}|| / ||v_k|| below which iteration stops.
    double tol = 1e-5;

    void validate() const;
};

struct TvResult {
    Image image;
    int iterations = 0;
    double energy = 0.0;
    /// Energy of the initial fill, then every `kTvAuditInterval` iterations,
    /// then of the returned image.
    std::vector<double> energy_trace;
};

inline constexpr int kTvAuditInterval = 10;

/// Isotropic TV with forward differences and Neumann image borders, plus the
/// fidelity term on the complement of `domain`. Channels are independent.
double tv_energy(const Image& f, const Image& v, const BinaryMask& domain, double lambda);

/// Primal-dual (Chambolle-Pock) minimisation of tv_energy. D starts filled
/// with the mean of its outer boundary ring. Throws InvalidInput when D covers
/// the whole image or shapes differ.
TvResult tv_inpaint(const Image& img, const BinaryMask& domain, const TvParams& params = {});

/// `img` with each channel of D set to the mean of that channel over the
/// 4-neighbour ring just outside D.
Image fill_with_boundary_mean(const Image& img, const BinaryMask& domain);

} // namespace vellum
