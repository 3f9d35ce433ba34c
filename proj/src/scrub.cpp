#include "deid/scrub.hpp"

#include "deid/dicom/errors.hpp"
#include "deid/fuzzy.hpp"
#include "deid/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace deid::scrub {

using dicom::photometric;

rescale read_rescale(const dicom::dataset& ds) {
    rescale r;
    if (auto s = ds.get_decimal(dicom::tags::rescale_slope)) r.slope = *s;
    if (auto i = ds.get_decimal(dicom::tags::rescale_intercept)) r.intercept = *i;
    return r;
}

std::optional<window> read_window(const dicom::dataset& ds) {
    const auto c = ds.get_decimal(dicom::tags::window_center);
    const auto w = ds.get_decimal(dicom::tags::window_width);
    if (!c || !w || *w < 1.0) return std::nullopt;
    return window{*c, *w};
}

namespace {

std::uint8_t clamp_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

}  // namespace

ocr::image8 to_8bit(const dicom::pixel_matrix& m, std::uint32_t frame, const rescale& r, const std::optional<window>& w) {
    if (r.slope == 0.0) throw std::invalid_argument("rescale slope must not be zero");
    if (w && w->width < 1.0) throw std::invalid_argument("window width must be at least 1");
    const auto& L = m.layout;
    const auto values = m.frame(frame);
    ocr::image8 img;
    img.rows = L.rows;
    img.cols = L.cols;
    img.channels = L.samples;
    img.bytes.resize(values.size());

    if (L.photometric == photometric::rgb) {
        bool all_flat = true;
        for (std::uint32_t c = 0; c < L.samples; ++c) {
            std::int32_t lo = std::numeric_limits<std::int32_t>::max();
            std::int32_t hi = std::numeric_limits<std::int32_t>::min();
            for (std::size_t i = c; i < values.size(); i += L.samples) {
                lo = std::min(lo, values[i]);
                hi = std::max(hi, values[i]);
            }
            const bool flat = lo == hi;
            all_flat = all_flat && flat;
            for (std::size_t i = c; i < values.size(); i += L.samples) {
                img.bytes[i] = flat ? 128 : clamp_byte(255.0 * (values[i] - lo) / static_cast<double>(hi - lo));
            }
        }
        img.degenerate = all_flat && !values.empty();
        return img;
    }

    auto modality = [&](std::int32_t s) { return r.slope * s + r.intercept; };
    const bool invert = L.photometric == photometric::monochrome1;
    if (w) {
        const double lo = w->center - w->width / 2.0;
        const double hi = w->center + w->width / 2.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double v = modality(values[i]);
            std::uint8_t out = 0;
            if (v <= lo) out = 0;
            else if (v > hi) out = 255;
            else out = clamp_byte(255.0 * (v - lo) / w->width);
            img.bytes[i] = invert ? static_cast<std::uint8_t>(255 - out) : out;
        }
        return img;
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto s : values) {
        lo = std::min(lo, modality(s));
        hi = std::max(hi, modality(s));
    }
    if (values.empty() || lo == hi) {
        std::fill(img.bytes.begin(), img.bytes.end(), std::uint8_t{128});
        img.degenerate = !values.empty();
        return img;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto out = clamp_byte(255.0 * (modality(values[i]) - lo) / (hi - lo));
        img.bytes[i] = invert ? static_cast<std::uint8_t>(255 - out) : out;
    }
    return img;
}

std::int32_t black_stored_value(const dicom::pixel_matrix& m, std::uint32_t frame, const rescale& r) {
    const auto& L = m.layout;
    if (L.photometric == photometric::rgb) return std::clamp(0, L.min_representable(), L.max_representable());
    const auto values = m.frame(frame);
    if (values.empty()) return std::clamp(0, L.min_representable(), L.max_representable());
    // extreme modality value, then back to a stored value
    double target = r.slope * values.front() + r.intercept;
    for (const auto s : values) {
        const double v = r.slope * s + r.intercept;
        target = L.photometric == photometric::monochrome1 ? std::max(target, v) : std::min(target, v);
    }
    const auto stored = std::llround((target - r.intercept) / r.slope);
    return static_cast<std::int32_t>(std::clamp<long long>(stored, L.min_representable(), L.max_representable()));
}

box redaction_box(const detection& d, int margin, std::uint32_t rows, std::uint32_t cols) {
    double x0 = d.box[0].x, x1 = d.box[0].x, y0 = d.box[0].y, y1 = d.box[0].y;
    for (const auto& p : d.box) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    // outward rounding so fractional corners never shrink the box
    box b;
    b.x0 = static_cast<std::int32_t>(std::floor(x0)) - margin;
    b.y0 = static_cast<std::int32_t>(std::floor(y0)) - margin;
    b.x1 = static_cast<std::int32_t>(std::ceil(x1)) + margin;
    b.y1 = static_cast<std::int32_t>(std::ceil(y1)) + margin;
    b.x0 = std::max(b.x0, 0);
    b.y0 = std::max(b.y0, 0);
    b.x1 = std::min(b.x1, static_cast<std::int32_t>(cols) - 1);
    b.y1 = std::min(b.y1, static_cast<std::int32_t>(rows) - 1);
    return b;
}

result scrub_pixels(dicom::dataset& ds, std::span<const std::string> store_values, ocr::engine& engine,
                    const ocr::frame_ref& source, const options& opts) {
    const auto matrix = dicom::decode_pixel_data(ds);
    const auto& L = matrix.layout;
    const auto r = read_rescale(ds);
    if (r.slope == 0.0) throw dicom::dicom_error(dicom::errc::unsupported_pixel_format, "RescaleSlope is zero");
    const auto w = read_window(ds);

    result out;
    struct fill {
        std::uint32_t frame;
        box region;
        std::int32_t black;
    };
    std::vector<fill> fills;
    const std::uint32_t frames = opts.first_frame_only ? std::min<std::uint32_t>(1, L.frames) : L.frames;
    for (std::uint32_t f = 0; f < frames; ++f) {
        const auto img = to_8bit(matrix, f, r, w);
        ++out.frames_scanned;
        const auto detections = ocr::detect_text(img, engine, {source.source, f});
        std::optional<std::int32_t> black;
        for (const auto& d : detections) {
            const auto matches = fuzzy::match_sensible(d.text, store_values, opts.threshold);
            if (matches.empty()) {
                out.ignored.push_back(d);
                continue;
            }
            if (!black) black = black_stored_value(matrix, f, r);
            const auto region = redaction_box(d, opts.margin, L.rows, L.cols);
            out.redactions.push_back({f, d, region, matches.front().value, matches.front().score});
            if (!region.empty()) fills.push_back({f, region, *black});
        }
    }
    if (fills.empty()) return out;

    auto* el = ds.find(dicom::tags::pixel_data);
    auto raw = el->bytes;
    for (const auto& fl : fills) {
        for (auto y = fl.region.y0; y <= fl.region.y1; ++y) {
            for (auto x = fl.region.x0; x <= fl.region.x1; ++x) {
                for (std::uint32_t s = 0; s < L.samples; ++s) {
                    dicom::store_sample(raw, L, fl.frame, static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), s,
                                        fl.black);
                }
            }
        }
    }
    el->set_bytes(std::move(raw));
    return out;
}

bool modality_allowed(const dicom::dataset& ds, std::span<const std::string> modalities) {
    const auto modality = ds.get_string(dicom::tags::modality).value_or("");
    return std::any_of(modalities.begin(), modalities.end(), [&](const std::string& m) {
        return m == "*" || text::fold_case(m) == text::fold_case(modality);
    });
}

}  // namespace deid::scrub
