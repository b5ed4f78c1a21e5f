#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vellum/image.hpp"

namespace vellum {

enum class Label : std::uint8_t {
    Keep,
    Inpaint,
    Training,
    NeumannEdge,
    ZeroDriftEdge,
    DirichletRim,
};

inline constexpr std::initializer_list<Label> kAllLabels{
    Label::Keep, Label::Inpaint, Label::Training, Label::NeumannEdge, Label::ZeroDriftEdge, Label::DirichletRim};

using AnnotationMask = Grid<Label>;

struct Rgb8 {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

/// Colour table of the annotation PNG format:
///   black KEEP, gray(128) INPAINT, blue TRAINING, red NEUMANN_EDGE,
///   white ZERO_DRIFT_EDGE, green DIRICHLET_RIM.
Rgb8 label_color(Label label);
std::optional<Label> label_from_color(Rgb8 color);

std::string_view label_name(Label label);
std::optional<Label> label_from_name(std::string_view name);

/// Decodes an annotation PNG. Throws MalformedAnnotation (with the first
/// offending pixel, in row-major order) on colours outside the table and
/// InvalidInput when the size differs from `expected_width` x `expected_height`
/// (pass negative values to skip the check).
AnnotationMask decode_annotation(std::span<const std::uint8_t> png, int expected_width = -1, int expected_height = -1);

/// 8-bit RGB PNG, bit-exact inverse of decode_annotation.
std::vector<std::uint8_t> encode_annotation(const AnnotationMask& mask);

/// Pixels whose label is one of `labels`.
BinaryMask select_labels(const AnnotationMask& mask, std::initializer_list<Label> labels);

/// The subdomain D: every pixel that is not KEEP or DIRICHLET_RIM.
BinaryMask domain_of(const AnnotationMask& mask);

/// Marks `mask` pixels with `inside`, the rest KEEP.
AnnotationMask annotation_from_mask(const BinaryMask& mask, Label inside = Label::Inpaint);

} // namespace vellum
