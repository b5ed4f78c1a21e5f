#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vellum/annotation.hpp"
#include "vellum/image.hpp"

namespace vellum::io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Decodes PNG/TIFF bytes (8 or 16 bit, gray/RGB/RGBA; alpha dropped) into
/// [0,1] samples. Gray inputs load as 1 channel, colour as 3-channel sRGB.
Image decode_image(std::span<const std::uint8_t> bytes);
Image load_image(const std::filesystem::path& path);

/// PNG encoding with 8- or 16-bit samples; deterministic for equal inputs.
std::vector<std::uint8_t> encode_png(const Image& img, int bit_depth = 8);
void save_png(const Image& img, const std::filesystem::path& path, int bit_depth = 8);

AnnotationMask load_annotation(const std::filesystem::path& path, int expected_width = -1, int expected_height = -1);
void save_annotation(const AnnotationMask& mask, const std::filesystem::path& path);

/// Gray PNG with value = cluster id (ids must be < 256).
std::vector<std::uint8_t> encode_label_png(const Grid<int>& labels);
Grid<int> decode_label_png(std::span<const std::uint8_t> bytes);

/// SHA-256 as lowercase hex.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

} // namespace vellum::io
