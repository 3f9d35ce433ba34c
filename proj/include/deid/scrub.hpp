/**
 * @file scrub.hpp
 * @brief Burned-in text redaction in stored pixel data.
 *
 * Each frame is rendered to 8 bits, handed to an OCR engine, and every
 * detection whose text matches a harvested sensitive value is painted over
 * with the stored value that displays as black. Only the pixels inside the
 * dilated bounding rectangle of a matched detection change.
 */

#pragma once

#include "deid/detection.hpp"
#include "deid/dicom/dataset.hpp"
#include "deid/dicom/pixel.hpp"
#include "deid/ocr.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace deid::scrub {

struct rescale {
    double slope = 1.0;
    double intercept = 0.0;
};

struct window {
    double center = 0.0;
    double width = 1.0;
};

/// RescaleSlope/Intercept, identity when absent.
[[nodiscard]] rescale read_rescale(const dicom::dataset& ds);
/// First WindowCenter/Width pair; nullopt when absent or width < 1.
[[nodiscard]] std::optional<window> read_window(const dicom::dataset& ds);

/// Render one frame for OCR. Throws std::invalid_argument when the slope
/// is zero or the window width below 1. A frame holding a single value
/// renders as uniform 128 with `degenerate` set.
[[nodiscard]] ocr::image8 to_8bit(const dicom::pixel_matrix& m, std::uint32_t frame, const rescale& r,
                                  const std::optional<window>& w);

/// Stored value that displays as black in `frame`: the frame's lowest
/// modality value mapped back through the rescale (highest for
/// MONOCHROME1), clamped to the representable range. RGB uses 0.
[[nodiscard]] std::int32_t black_stored_value(const dicom::pixel_matrix& m, std::uint32_t frame, const rescale& r);

/// Inclusive pixel rectangle.
struct box {
    std::int32_t x0 = 0, y0 = 0, x1 = -1, y1 = -1;
    [[nodiscard]] bool empty() const noexcept { return x1 < x0 || y1 < y0; }
    [[nodiscard]] bool contains(std::int32_t x, std::int32_t y) const noexcept {
        return x >= x0 && x <= x1 && y >= y0 && y <= y1;
    }
    friend bool operator==(const box&, const box&) = default;
};

/// Axis-aligned bounds of the quadrilateral, grown by `margin`, clipped
/// to the image.
[[nodiscard]] box redaction_box(const detection& d, int margin, std::uint32_t rows, std::uint32_t cols);

struct redaction_record {
    std::uint32_t frame = 0;
    detection found;
    box region;
    std::string matched;  ///< store value that matched
    int score = 0;
};

struct options {
    int threshold = 49;
    int margin = 2;
    bool first_frame_only = false;
};

struct result {
    std::vector<redaction_record> redactions;
    std::vector<detection> ignored;  ///< detections with no store match
    std::uint32_t frames_scanned = 0;
};

/// Detect and redact. Pixel data is rewritten in place only when something
/// matched. Throws dicom_error(unsupported_pixel_format / size_mismatch)
/// and ocr::engine_unavailable; the data set is untouched when it throws.
result scrub_pixels(dicom::dataset& ds, std::span<const std::string> store_values, ocr::engine& engine,
                    const ocr::frame_ref& source, const options& opts);

/// True when OCR should run for this modality; "*" admits everything.
[[nodiscard]] bool modality_allowed(const dicom::dataset& ds, std::span<const std::string> modalities);

}  // namespace deid::scrub
