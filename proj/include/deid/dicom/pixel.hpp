/**
 * @file pixel.hpp
 * @brief Native (uncompressed) pixel data decoding.
 *
 * Stored values are extracted per sample, shifted down from HighBit,
 * masked to BitsStored and then sign-extended when PixelRepresentation is 1.
 */

#pragma once

#include "deid/dicom/dataset.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace deid::dicom {

enum class photometric { monochrome1, monochrome2, rgb };

struct pixel_layout {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint32_t frames = 1;
    std::uint32_t samples = 1;
    std::uint32_t bits_allocated = 8;
    std::uint32_t bits_stored = 8;
    std::uint32_t high_bit = 7;
    bool is_signed = false;
    dicom::photometric photometric = photometric::monochrome2;
    bool planar = false;  ///< PlanarConfiguration 1 (colour-by-plane)

    [[nodiscard]] std::size_t values_per_frame() const noexcept {
        return static_cast<std::size_t>(rows) * cols * samples;
    }
    [[nodiscard]] std::size_t value_count() const noexcept { return values_per_frame() * frames; }
    [[nodiscard]] std::size_t expected_bytes() const noexcept { return value_count() * (bits_allocated / 8); }
    [[nodiscard]] std::int32_t min_representable() const noexcept;
    [[nodiscard]] std::int32_t max_representable() const noexcept;

    /// Byte offset of a sample inside the pixel data element.
    [[nodiscard]] std::size_t byte_offset(std::uint32_t frame, std::uint32_t row, std::uint32_t col,
                                          std::uint32_t sample) const noexcept;

    friend bool operator==(const pixel_layout&, const pixel_layout&) = default;
};

/// Stored values, ordered frame, row, column, sample (pixel interleaved),
/// regardless of the planar configuration on disk.
struct pixel_matrix {
    pixel_layout layout;
    std::vector<std::int32_t> values;

    [[nodiscard]] std::size_t index(std::uint32_t frame, std::uint32_t row, std::uint32_t col,
                                    std::uint32_t sample = 0) const noexcept {
        return ((static_cast<std::size_t>(frame) * layout.rows + row) * layout.cols + col) * layout.samples + sample;
    }
    [[nodiscard]] std::int32_t at(std::uint32_t frame, std::uint32_t row, std::uint32_t col,
                                  std::uint32_t sample = 0) const noexcept {
        return values[index(frame, row, col, sample)];
    }
    [[nodiscard]] std::span<const std::int32_t> frame(std::uint32_t f) const noexcept {
        return std::span(values).subspan(static_cast<std::size_t>(f) * layout.values_per_frame(),
                                         layout.values_per_frame());
    }
};

/// Read and validate the image pixel module. Throws errc::unsupported_pixel_format.
[[nodiscard]] pixel_layout read_pixel_layout(const dataset& ds);

/// Throws errc::unsupported_pixel_format or errc::size_mismatch.
[[nodiscard]] pixel_matrix decode_pixel_data(const dataset& ds);

/// Encode values into a fresh pixel data buffer (bits above BitsStored zero).
[[nodiscard]] std::vector<std::uint8_t> encode_pixel_data(const pixel_matrix& m);

/// Overwrite one sample in an existing pixel data buffer.
void store_sample(std::span<std::uint8_t> raw, const pixel_layout& layout, std::uint32_t frame, std::uint32_t row,
                  std::uint32_t col, std::uint32_t sample, std::int32_t value) noexcept;

}  // namespace deid::dicom
