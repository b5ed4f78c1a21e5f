#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vellum/annotation.hpp"
#include "vellum/exemplar.hpp"
#include "vellum/segmentation.hpp"
#include "vellum/stereo.hpp"
#include "vellum/tv_inpaint.hpp"

namespace vellum {

struct CropRect {
    int x = 0, y = 0, width = 0, height = 0;
    friend bool operator==(const CropRect&, const CropRect&) = default;
};

struct PipelineConfig {
    ChanVeseParams chan_vese;
    KMeansParams kmeans;
    double min_overlap = 0.05;
    int min_area = 20;
    int closing_radius = 2;
    TvParams tv;
    PatchParams exemplar;
    /// Segmentation only looks inside the crop; D is empty elsewhere.
    std::optional<CropRect> crop;
    /// Sample depth of image artifacts (8 or 16).
    int bit_depth = 16;

    void validate() const;
};

/// Sections [chan_vese] mu nu lambda1 lambda2 max_iter tol seed_radius,
/// [kmeans] k restarts seed max_iter, [refine] min_overlap min_area
/// closing_radius, [tv] lambda max_iter tol, [exemplar] patch_side
/// propagation_iters search_samples scales seed max_outer change_threshold,
/// [crop] x y width height, [output] bit_depth. Unknown keys are errors.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// In-memory stages
// ---------------------------------------------------------------------------

struct SegmentResult {
    BinaryMask training; // D1
    LabelMap labels;
    BinaryMask domain; // D
    double c1 = 0.0, c2 = 0.0;
    std::vector<std::string> warnings;
};

/// Chan-Vese from the seeds gives D1; k-means on the feature image labels
/// every pixel; clusters covering D1 are propagated, united with D1 and
/// refined.
SegmentResult segment_damage(const Image& img, std::span<const Pixel> seeds, const PipelineConfig& config);

/// Same chain with D1 given directly.
SegmentResult segment_from_training(const Image& img, const BinaryMask& training, const PipelineConfig& config);

// ---------------------------------------------------------------------------
// File-level commands. Each writes its artifacts plus manifest.json into
// `out_dir` and returns the manifest path.
// ---------------------------------------------------------------------------

struct SegmentCommand {
    std::filesystem::path image;
    std::vector<Pixel> seeds;
    PipelineConfig config;
};

struct TvCommand {
    std::filesystem::path image;
    std::filesystem::path mask;
    TvParams tv;
    int bit_depth = 16;
};

struct InpaintCommand {
    std::filesystem::path image;
    std::filesystem::path mask;
    PatchParams patch;
    TvParams tv;
    /// Absent: TV initialisation.
    std::optional<std::filesystem::path> init;
    int bit_depth = 16;
};

struct RestoreCommand {
    std::filesystem::path image;
    std::vector<Pixel> seeds;
    std::optional<std::filesystem::path> mask;
    PipelineConfig config;
};

struct OsmosisCommand {
    std::filesystem::path rgb;
    std::filesystem::path infrared;
    std::filesystem::path mask;
    int bit_depth = 16;
};

struct StereoCommand {
    std::filesystem::path image;
    std::filesystem::path scene;
    /// Absent: 2% of the scene's depth range.
    std::optional<double> baseline;
    double fov_deg = 40.0;
    StereoMode mode = StereoMode::SideBySide;
    double background_depth = 10.0;
    PatchParams patch;
    int bit_depth = 16;
};

/// Artifact names written by each command.
///   segment:    d1.png labels.png domain.png
///   tv-inpaint: tv.png
///   inpaint:    inpainted.png
///   restore:    d1.png labels.png domain.png tv_init.png final.png (seeded)
///               domain.png tv_init.png final.png (mask given)
///   osmosis:    osmosis.png
///   stereo:     depth.png holes.png right.png stereo.png
std::filesystem::path run_segment(const SegmentCommand& cmd, const std::filesystem::path& out_dir);
std::filesystem::path run_tv(const TvCommand& cmd, const std::filesystem::path& out_dir);
std::filesystem::path run_inpaint(const InpaintCommand& cmd, const std::filesystem::path& out_dir);
std::filesystem::path run_restore(const RestoreCommand& cmd, const std::filesystem::path& out_dir);
std::filesystem::path run_osmosis(const OsmosisCommand& cmd, const std::filesystem::path& out_dir);
std::filesystem::path run_stereo(const StereoCommand& cmd, const std::filesystem::path& out_dir);

/// Baseline used when none is given: 2% of (max depth - min depth), or 2%
/// of the background depth for a flat scene.
double default_baseline(const DepthMap& depth);

} // namespace vellum
