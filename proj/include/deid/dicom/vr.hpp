/**
 * @file vr.hpp
 * @brief Value representations and their encoding rules.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace deid::dicom {

enum class vr : std::uint8_t {
    AE, AS, AT, CS, DA, DS, DT, FD, FL, IS, LO, LT, OB, OD, OF, OL, OV, OW,
    PN, SH, SL, SQ, SS, ST, SV, TM, UC, UI, UL, UN, UR, US, UT, UV,
};

[[nodiscard]] std::string_view to_string(vr v) noexcept;
[[nodiscard]] std::optional<vr> parse_vr(std::string_view code) noexcept;

/// Explicit VR elements of these VRs carry 2 reserved bytes and a 32-bit length.
[[nodiscard]] bool has_long_length(vr v) noexcept;

/// Character-string VRs whose values are backslash-delimited text.
[[nodiscard]] bool is_string(vr v) noexcept;

/// Fixed-width binary numbers.
[[nodiscard]] bool is_binary_numeric(vr v) noexcept;

/// Numeric VRs, binary or decimal/integer strings.
[[nodiscard]] bool is_numeric(vr v) noexcept;

[[nodiscard]] bool is_temporal(vr v) noexcept;

/// Byte width of one binary value (0 for non-binary VRs).
[[nodiscard]] std::size_t binary_width(vr v) noexcept;

/// Padding byte for odd-length values.
[[nodiscard]] char padding_byte(vr v) noexcept;

}  // namespace deid::dicom
