#include "vellum/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace vellum::io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("short write to " + path.string());
    }
}

Image decode_image(std::span<const std::uint8_t> bytes)
{
    if (bytes.empty()) {
        throw InvalidInput("empty image buffer");
    }
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat m = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
    if (m.empty()) {
        throw InvalidInput("not a decodable PNG/TIFF image");
    }
    double scale = 1.0;
    switch (m.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F:
    case CV_64F: scale = 1.0; break;
    default: throw InvalidInput("unsupported sample depth");
    }
    const int src_nc = m.channels();
    const int nc = src_nc <= 2 ? 1 : 3;
    cv::Mat d;
    m.convertTo(d, CV_MAKETYPE(CV_64F, src_nc), scale);
    Image img(d.cols, d.rows, nc, nc == 1 ? ColorSpace::Gray : ColorSpace::SRGB);
    for (int y = 0; y < d.rows; ++y) {
        const double* row = d.ptr<double>(y);
        for (int x = 0; x < d.cols; ++x) {
            const double* p = row + static_cast<std::ptrdiff_t>(x) * src_nc;
            if (nc == 1) {
                img.at(x, y) = p[0];
            } else {
                img.at(x, y, 0) = p[2];
                img.at(x, y, 1) = p[1];
                img.at(x, y, 2) = p[0];
            }
        }
    }
    img.clamp01();
    return img;
}

Image load_image(const std::filesystem::path& path)
{
    return decode_image(read_file(path));
}

std::vector<std::uint8_t> encode_png(const Image& img, int bit_depth)
{
    if (bit_depth != 8 && bit_depth != 16) {
        throw InvalidInput("PNG bit depth must be 8 or 16");
    }
    const int nc = img.channels();
    const double maxv = bit_depth == 8 ? 255.0 : 65535.0;
    cv::Mat m(img.height(), img.width(), CV_MAKETYPE(bit_depth == 8 ? CV_8U : CV_16U, nc));
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < nc; ++c) {
                // OpenCV channel order is BGR(A)
                const int dc = nc >= 3 && c < 3 ? 2 - c : c;
                const double v = std::round(std::clamp(img.at(x, y, c), 0.0, 1.0) * maxv);
                if (bit_depth == 8) {
                    m.ptr<std::uint8_t>(y)[x * nc + dc] = static_cast<std::uint8_t>(v);
                } else {
                    m.ptr<std::uint16_t>(y)[x * nc + dc] = static_cast<std::uint16_t>(v);
                }
            }
        }
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", m, out, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
        throw IoError("PNG encoding failed");
    }
    return out;
}

void save_png(const Image& img, const std::filesystem::path& path, int bit_depth)
{
    write_file(path, encode_png(img, bit_depth));
}

AnnotationMask load_annotation(const std::filesystem::path& path, int expected_width, int expected_height)
{
    return decode_annotation(read_file(path), expected_width, expected_height);
}

void save_annotation(const AnnotationMask& mask, const std::filesystem::path& path)
{
    write_file(path, encode_annotation(mask));
}

std::vector<std::uint8_t> encode_label_png(const Grid<int>& labels)
{
    cv::Mat m(labels.height(), labels.width(), CV_8UC1);
    for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) {
            const int v = labels(x, y);
            if (v < 0 || v > 255) {
                throw InvalidInput("label id does not fit in 8 bits");
            }
            m.ptr<std::uint8_t>(y)[x] = static_cast<std::uint8_t>(v);
        }
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", m, out, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
        throw IoError("PNG encoding failed");
    }
    return out;
}

Grid<int> decode_label_png(std::span<const std::uint8_t> bytes)
{
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    const cv::Mat m = cv::imdecode(buf, cv::IMREAD_GRAYSCALE);
    if (m.empty()) {
        throw InvalidInput("not a decodable label PNG");
    }
    Grid<int> out(m.cols, m.rows);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            out(x, y) = m.ptr<std::uint8_t>(y)[x];
        }
    }
    return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

} // namespace vellum::io
