#include "vellum/segmentation.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <random>
#include <string>
#include <unordered_set>

namespace vellum {
namespace {

double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double sqdist(const double* a, const double* b, int dim)
{
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double t = a[d] - b[d];
        s += t * t;
    }
    return s;
}

std::size_t count_distinct(std::span<const double> points, int dim, std::size_t cap)
{
    const std::size_t n = points.size() / static_cast<std::size_t>(dim);
    std::unordered_set<std::string> seen;
    const std::size_t bytes = static_cast<std::size_t>(dim) * sizeof(double);
    std::string key(bytes, '\0');
    for (std::size_t i = 0; i < n && seen.size() < cap; ++i) {
        std::memcpy(key.data(), points.data() + i * static_cast<std::size_t>(dim), bytes);
        seen.insert(key);
    }
    return seen.size();
}

struct Run {
    std::vector<int> assignment;
    std::vector<double> centroids;
    double wcss = std::numeric_limits<double>::infinity();
};

Run lloyd(std::span<const double> points, std::size_t n, int dim, int k, int max_iter, std::mt19937_64& rng)
{
    const auto ud = static_cast<std::size_t>(dim);
    const double* pts = points.data();
    auto point = [&](std::size_t i) { return pts + i * ud; };

    // k-means++ seeding
    Run run;
    run.centroids.assign(static_cast<std::size_t>(k) * ud, 0.0);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::size_t first = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
    std::copy_n(point(first), dim, run.centroids.begin());
    for (int c = 1; c < k; ++c) {
        const double* prev = run.centroids.data() + static_cast<std::size_t>(c - 1) * ud;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], sqdist(point(i), prev, dim));
            total += nearest[i];
        }
        std::size_t pick = n - 1;
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                target -= nearest[i];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
        }
        std::copy_n(point(pick), dim, run.centroids.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * ud));
    }

    run.assignment.assign(n, -1);
    std::vector<double> dist(n, 0.0);
    std::vector<double> sums(static_cast<std::size_t>(k) * ud);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k));

    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = sqdist(point(i), run.centroids.data() + static_cast<std::size_t>(c) * ud, dim);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            dist[i] = bd;
            if (run.assignment[i] != best) {
                run.assignment[i] = best;
                changed = true;
            }
        }
        if (!changed) {
            break;
        }

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(sizes.begin(), sizes.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(run.assignment[i]);
            ++sizes[c];
            for (int d = 0; d < dim; ++d) {
                sums[c * ud + static_cast<std::size_t>(d)] += point(i)[d];
            }
        }
        for (int c = 0; c < k; ++c) {
            const auto uc = static_cast<std::size_t>(c);
            if (sizes[uc] == 0) {
                // Re-seed at the point farthest from its own centroid.
                std::size_t far = 0;
                for (std::size_t i = 1; i < n; ++i) {
                    if (dist[i] > dist[far]) {
                        far = i;
                    }
                }
                std::copy_n(point(far), dim, run.centroids.begin() + static_cast<std::ptrdiff_t>(uc * ud));
                dist[far] = 0.0;
                continue;
            }
            for (int d = 0; d < dim; ++d) {
                run.centroids[uc * ud + static_cast<std::size_t>(d)] =
                    sums[uc * ud + static_cast<std::size_t>(d)] / static_cast<double>(sizes[uc]);
            }
        }
    }

    // Final assignment against the final centroids.
    run.wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            const double d = sqdist(point(i), run.centroids.data() + static_cast<std::size_t>(c) * ud, dim);
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        run.assignment[i] = best;
        run.wcss += bd;
    }
    return run;
}

} // namespace

KMeansResult kmeans(std::span<const double> points, int dim, const KMeansParams& params)
{
    if (params.k < 2) {
        throw InvalidInput("k-means: K must be at least 2");
    }
    if (dim <= 0 || points.size() % static_cast<std::size_t>(dim) != 0) {
        throw InvalidInput("k-means: point buffer is not a multiple of the dimension");
    }
    if (params.restarts < 1 || params.max_iter < 1) {
        throw InvalidInput("k-means: restarts and max_iter must be at least 1");
    }
    const std::size_t n = points.size() / static_cast<std::size_t>(dim);
    if (n == 0) {
        throw InvalidInput("k-means: no points");
    }

    KMeansResult result;
    result.dim = dim;
    int k = params.k;
    const std::size_t distinct = count_distinct(points, dim, static_cast<std::size_t>(k));
    if (distinct < static_cast<std::size_t>(k)) {
        result.warnings.push_back("k-means: only " + std::to_string(distinct) + " distinct feature vectors; K reduced from "
                                  + std::to_string(k) + " to " + std::to_string(distinct));
        k = static_cast<int>(distinct);
    }
    result.k = k;
    if (k == 1) {
        result.assignment.assign(n, 0);
        result.centroids.assign(points.begin(), points.begin() + dim);
        result.wcss = 0.0;
        return result;
    }

    Run best;
    for (int r = 0; r < params.restarts; ++r) {
        std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                          static_cast<std::uint32_t>(r)};
        std::mt19937_64 rng(seq);
        Run run = lloyd(points, n, dim, k, params.max_iter, rng);
        if (run.wcss < best.wcss) {
            best = std::move(run);
        }
    }
    result.assignment = std::move(best.assignment);
    result.centroids = std::move(best.centroids);
    result.wcss = best.wcss;
    return result;
}

LabelResult kmeans_label(const FeatureImage& features, const KMeansParams& params)
{
    KMeansResult km = kmeans(features.data(), features.dim(), params);
    LabelResult out;
    out.labels.k = km.k;
    out.labels.ids = Grid<int>(features.width(), features.height());
    std::copy(km.assignment.begin(), km.assignment.end(), out.labels.ids.values().begin());
    out.centroids = std::move(km.centroids);
    out.wcss = km.wcss;
    out.warnings = std::move(km.warnings);
    return out;
}

BinaryMask propagate_training_labels(const LabelMap& labels, const BinaryMask& training, double min_overlap)
{
    if (!training.same_shape(labels.ids)) {
        throw InvalidInput("propagate: training mask and label map dimensions differ");
    }
    const std::size_t total = count(training);
    if (total == 0) {
        throw InvalidInput("propagate: training region is empty");
    }
    std::vector<std::size_t> hits(static_cast<std::size_t>(std::max(labels.k, 1)), 0);
    for (std::size_t i = 0; i < training.size(); ++i) {
        const int id = labels.ids[i];
        if (id < 0 || id >= labels.k) {
            throw InvalidInput("propagate: label id out of range");
        }
        if (training[i] != 0) {
            ++hits[static_cast<std::size_t>(id)];
        }
    }
    std::vector<bool> selected(hits.size(), false);
    for (std::size_t c = 0; c < hits.size(); ++c) {
        selected[c] = hits[c] > 0 && static_cast<double>(hits[c]) >= min_overlap * static_cast<double>(total);
    }
    BinaryMask out(training.width(), training.height(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = selected[static_cast<std::size_t>(labels.ids[i])] ? 1 : 0;
    }
    return out;
}

} // namespace vellum
