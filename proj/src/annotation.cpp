#include "vellum/annotation.hpp"

#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace vellum {

Rgb8 label_color(Label label)
{
    switch (label) {
    case Label::Keep: return {0, 0, 0};
    case Label::Inpaint: return {128, 128, 128};
    case Label::Training: return {0, 0, 255};
    case Label::NeumannEdge: return {255, 0, 0};
    case Label::ZeroDriftEdge: return {255, 255, 255};
    case Label::DirichletRim: return {0, 255, 0};
    }
    return {0, 0, 0};
}

std::optional<Label> label_from_color(Rgb8 color)
{
    for (Label l : kAllLabels) {
        if (label_color(l) == color) {
            return l;
        }
    }
    return std::nullopt;
}

std::string_view label_name(Label label)
{
    switch (label) {
    case Label::Keep: return "keep";
    case Label::Inpaint: return "inpaint";
    case Label::Training: return "training";
    case Label::NeumannEdge: return "neumann_edge";
    case Label::ZeroDriftEdge: return "zero_drift_edge";
    case Label::DirichletRim: return "dirichlet_rim";
    }
    return "keep";
}

std::optional<Label> label_from_name(std::string_view name)
{
    for (Label l : kAllLabels) {
        if (label_name(l) == name) {
            return l;
        }
    }
    return std::nullopt;
}

AnnotationMask decode_annotation(std::span<const std::uint8_t> png, int expected_width, int expected_height)
{
    if (png.empty()) {
        throw InvalidInput("annotation: empty PNG buffer");
    }
    const cv::Mat buf(1, static_cast<int>(png.size()), CV_8UC1, const_cast<std::uint8_t*>(png.data()));
    const cv::Mat img = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
    if (img.empty()) {
        throw InvalidInput("annotation: not a decodable image");
    }
    if (img.depth() != CV_8U) {
        throw InvalidInput("annotation: expected an 8-bit PNG");
    }
    if (expected_width >= 0 && (img.cols != expected_width || img.rows != expected_height)) {
        throw InvalidInput("annotation is " + std::to_string(img.cols) + "x" + std::to_string(img.rows)
                           + ", image is " + std::to_string(expected_width) + "x"
                           + std::to_string(expected_height));
    }
    AnnotationMask mask(img.cols, img.rows, Label::Keep);
    const int nc = img.channels();
    for (int y = 0; y < img.rows; ++y) {
        const std::uint8_t* row = img.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.cols; ++x) {
            const std::uint8_t* p = row + static_cast<std::ptrdiff_t>(x) * nc;
            Rgb8 c;
            if (nc == 1 || nc == 2) {
                c = {p[0], p[0], p[0]};
            } else {
                c = {p[2], p[1], p[0]}; // OpenCV stores BGR(A); alpha ignored
            }
            const auto label = label_from_color(c);
            if (!label) {
                throw MalformedAnnotation(x, y, "annotation: unknown colour (" + std::to_string(c.r) + ","
                                                    + std::to_string(c.g) + "," + std::to_string(c.b)
                                                    + ") at pixel (" + std::to_string(x) + ","
                                                    + std::to_string(y) + ")");
            }
            mask(x, y) = *label;
        }
    }
    return mask;
}

std::vector<std::uint8_t> encode_annotation(const AnnotationMask& mask)
{
    cv::Mat img(mask.height(), mask.width(), CV_8UC3);
    for (int y = 0; y < mask.height(); ++y) {
        auto* row = img.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width(); ++x) {
            const Rgb8 c = label_color(mask(x, y));
            row[3 * x] = c.b;
            row[3 * x + 1] = c.g;
            row[3 * x + 2] = c.r;
        }
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", img, out, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
        throw IoError("annotation: PNG encoding failed");
    }
    return out;
}

BinaryMask select_labels(const AnnotationMask& mask, std::initializer_list<Label> labels)
{
    BinaryMask out(mask.width(), mask.height(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        for (Label l : labels) {
            if (mask[i] == l) {
                out[i] = 1;
                break;
            }
        }
    }
    return out;
}

BinaryMask domain_of(const AnnotationMask& mask)
{
    return select_labels(mask, {Label::Inpaint, Label::Training, Label::NeumannEdge, Label::ZeroDriftEdge});
}

AnnotationMask annotation_from_mask(const BinaryMask& mask, Label inside)
{
    AnnotationMask out(mask.width(), mask.height(), Label::Keep);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0) {
            out[i] = inside;
        }
    }
    return out;
}

} // namespace vellum
