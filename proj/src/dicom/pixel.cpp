#include "deid/dicom/pixel.hpp"

#include "deid/dicom/errors.hpp"

#include <cstring>

namespace deid::dicom {

namespace {

[[noreturn]] void unsupported(const std::string& what) { throw dicom_error(errc::unsupported_pixel_format, what); }

std::uint32_t required_us(const dataset& ds, tag t, const char* name) {
    const auto v = ds.get_int(t);
    if (!v || *v < 0) unsupported(std::string("missing or invalid ") + name);
    return static_cast<std::uint32_t>(*v);
}

}  // namespace

std::int32_t pixel_layout::min_representable() const noexcept {
    return is_signed ? -(std::int32_t{1} << (bits_stored - 1)) : 0;
}

std::int32_t pixel_layout::max_representable() const noexcept {
    return is_signed ? (std::int32_t{1} << (bits_stored - 1)) - 1
                     : static_cast<std::int32_t>((std::int64_t{1} << bits_stored) - 1);
}

std::size_t pixel_layout::byte_offset(std::uint32_t frame, std::uint32_t row, std::uint32_t col,
                                      std::uint32_t sample) const noexcept {
    const std::size_t bytes = bits_allocated / 8;
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    const std::size_t pixel = static_cast<std::size_t>(row) * cols + col;
    std::size_t index = 0;
    if (planar) {
        index = static_cast<std::size_t>(frame) * pixels * samples + sample * pixels + pixel;
    } else {
        index = (static_cast<std::size_t>(frame) * pixels + pixel) * samples + sample;
    }
    return index * bytes;
}

pixel_layout read_pixel_layout(const dataset& ds) {
    pixel_layout l;
    l.rows = required_us(ds, tags::rows, "Rows");
    l.cols = required_us(ds, tags::columns, "Columns");
    l.bits_allocated = required_us(ds, tags::bits_allocated, "BitsAllocated");
    l.bits_stored = static_cast<std::uint32_t>(ds.get_int(tags::bits_stored).value_or(l.bits_allocated));
    l.high_bit = static_cast<std::uint32_t>(ds.get_int(tags::high_bit).value_or(l.bits_stored - 1));
    l.samples = static_cast<std::uint32_t>(ds.get_int(tags::samples_per_pixel).value_or(1));
    l.is_signed = ds.get_int(tags::pixel_representation).value_or(0) == 1;
    l.planar = ds.get_int(tags::planar_configuration).value_or(0) == 1;
    const auto frames = ds.get_int(tags::number_of_frames).value_or(1);
    if (frames < 1) unsupported("NumberOfFrames must be positive");
    l.frames = static_cast<std::uint32_t>(frames);

    if (l.bits_allocated != 8 && l.bits_allocated != 16) {
        unsupported("BitsAllocated " + std::to_string(l.bits_allocated));
    }
    if (l.bits_stored < 1 || l.bits_stored > l.bits_allocated || l.high_bit >= l.bits_allocated ||
        l.high_bit + 1 < l.bits_stored) {
        unsupported("inconsistent BitsStored/HighBit");
    }
    if (l.samples != 1 && l.samples != 3) unsupported("SamplesPerPixel " + std::to_string(l.samples));
    if (l.rows == 0 || l.cols == 0) unsupported("empty image");

    const auto pi = ds.get_string(tags::photometric_interpretation).value_or("");
    if (pi == "MONOCHROME1") {
        l.photometric = photometric::monochrome1;
    } else if (pi == "MONOCHROME2") {
        l.photometric = photometric::monochrome2;
    } else if (pi == "RGB") {
        l.photometric = photometric::rgb;
    } else {
        unsupported("PhotometricInterpretation '" + pi + "'");
    }
    if ((l.photometric == photometric::rgb) != (l.samples == 3)) {
        unsupported("PhotometricInterpretation does not agree with SamplesPerPixel");
    }
    return l;
}

pixel_matrix decode_pixel_data(const dataset& ds) {
    pixel_matrix m;
    m.layout = read_pixel_layout(ds);
    const auto* el = ds.find(tags::pixel_data);
    if (el == nullptr) unsupported("no pixel data");
    const auto& l = m.layout;
    const std::size_t expected = l.expected_bytes();
    const std::size_t actual = el->bytes.size();
    if (actual != expected && !(expected % 2 == 1 && actual == expected + 1)) {
        throw dicom_error(errc::size_mismatch, "pixel data holds " + std::to_string(actual) + " bytes, expected " +
                                                   std::to_string(expected));
    }

    const std::uint32_t shift = l.high_bit + 1 - l.bits_stored;
    const std::uint32_t mask = l.bits_stored >= 32 ? 0xFFFFFFFFU : ((1U << l.bits_stored) - 1U);
    const std::uint32_t sign_bit = 1U << (l.bits_stored - 1);
    m.values.resize(l.value_count());
    const auto* raw = el->bytes.data();
    for (std::uint32_t f = 0; f < l.frames; ++f) {
        for (std::uint32_t r = 0; r < l.rows; ++r) {
            for (std::uint32_t c = 0; c < l.cols; ++c) {
                for (std::uint32_t s = 0; s < l.samples; ++s) {
                    const auto off = l.byte_offset(f, r, c, s);
                    std::uint32_t word = raw[off];
                    if (l.bits_allocated == 16) word |= static_cast<std::uint32_t>(raw[off + 1]) << 8;
                    std::uint32_t v = (word >> shift) & mask;
                    std::int32_t value = static_cast<std::int32_t>(v);
                    if (l.is_signed && (v & sign_bit) != 0) value = static_cast<std::int32_t>(v) - static_cast<std::int32_t>(mask) - 1;
                    m.values[m.index(f, r, c, s)] = value;
                }
            }
        }
    }
    return m;
}

void store_sample(std::span<std::uint8_t> raw, const pixel_layout& l, std::uint32_t frame, std::uint32_t row,
                  std::uint32_t col, std::uint32_t sample, std::int32_t value) noexcept {
    const std::uint32_t shift = l.high_bit + 1 - l.bits_stored;
    const std::uint32_t mask = (1U << l.bits_stored) - 1U;
    const std::uint32_t word = (static_cast<std::uint32_t>(value) & mask) << shift;
    const auto off = l.byte_offset(frame, row, col, sample);
    raw[off] = static_cast<std::uint8_t>(word & 0xFF);
    if (l.bits_allocated == 16) raw[off + 1] = static_cast<std::uint8_t>((word >> 8) & 0xFF);
}

std::vector<std::uint8_t> encode_pixel_data(const pixel_matrix& m) {
    const auto& l = m.layout;
    std::vector<std::uint8_t> raw(l.expected_bytes() + (l.expected_bytes() % 2), 0);
    for (std::uint32_t f = 0; f < l.frames; ++f) {
        for (std::uint32_t r = 0; r < l.rows; ++r) {
            for (std::uint32_t c = 0; c < l.cols; ++c) {
                for (std::uint32_t s = 0; s < l.samples; ++s) store_sample(raw, l, f, r, c, s, m.at(f, r, c, s));
            }
        }
    }
    return raw;
}

}  // namespace deid::dicom
