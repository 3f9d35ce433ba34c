/**
 * @file tag.hpp
 * @brief DICOM attribute tag and the handful of tags the toolkit names directly.
 */

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace deid::dicom {

struct tag {
    std::uint16_t group = 0;
    std::uint16_t element = 0;

    constexpr auto operator<=>(const tag&) const = default;

    [[nodiscard]] constexpr bool is_private() const noexcept { return (group & 1U) != 0; }
    [[nodiscard]] constexpr bool is_group_length() const noexcept { return element == 0; }
    [[nodiscard]] constexpr std::uint32_t combined() const noexcept {
        return (static_cast<std::uint32_t>(group) << 16) | element;
    }

    /// "GGGG,EEEE" in uppercase hex.
    [[nodiscard]] std::string to_string() const;

    /// Accepts "GGGG,EEEE", "(GGGG,EEEE)" and "GGGGEEEE", hex digits in any case.
    /// Throws config_error-compatible std::invalid_argument on malformed input.
    [[nodiscard]] static tag parse(std::string_view text);
};

namespace tags {
inline constexpr tag file_meta_group_length{0x0002, 0x0000};
inline constexpr tag media_storage_sop_class_uid{0x0002, 0x0002};
inline constexpr tag media_storage_sop_instance_uid{0x0002, 0x0003};
inline constexpr tag transfer_syntax_uid{0x0002, 0x0010};
inline constexpr tag specific_character_set{0x0008, 0x0005};
inline constexpr tag study_date{0x0008, 0x0020};
inline constexpr tag series_date{0x0008, 0x0021};
inline constexpr tag sop_class_uid{0x0008, 0x0016};
inline constexpr tag sop_instance_uid{0x0008, 0x0018};
inline constexpr tag modality{0x0008, 0x0060};
inline constexpr tag referring_physician_name{0x0008, 0x0090};
inline constexpr tag physicians_of_record{0x0008, 0x1048};
inline constexpr tag performing_physician_name{0x0008, 0x1050};
inline constexpr tag operators_name{0x0008, 0x1070};
inline constexpr tag institution_name{0x0008, 0x0080};
inline constexpr tag institution_address{0x0008, 0x0081};
inline constexpr tag patient_name{0x0010, 0x0010};
inline constexpr tag patient_id{0x0010, 0x0020};
inline constexpr tag patient_birth_date{0x0010, 0x0030};
inline constexpr tag patient_age{0x0010, 0x1010};
inline constexpr tag patient_address{0x0010, 0x1040};
inline constexpr tag study_instance_uid{0x0020, 0x000D};
inline constexpr tag series_instance_uid{0x0020, 0x000E};
inline constexpr tag instance_number{0x0020, 0x0013};
inline constexpr tag samples_per_pixel{0x0028, 0x0002};
inline constexpr tag photometric_interpretation{0x0028, 0x0004};
inline constexpr tag planar_configuration{0x0028, 0x0006};
inline constexpr tag number_of_frames{0x0028, 0x0008};
inline constexpr tag rows{0x0028, 0x0010};
inline constexpr tag columns{0x0028, 0x0011};
inline constexpr tag bits_allocated{0x0028, 0x0100};
inline constexpr tag bits_stored{0x0028, 0x0101};
inline constexpr tag high_bit{0x0028, 0x0102};
inline constexpr tag pixel_representation{0x0028, 0x0103};
inline constexpr tag window_center{0x0028, 0x1050};
inline constexpr tag window_width{0x0028, 0x1051};
inline constexpr tag rescale_intercept{0x0028, 0x1052};
inline constexpr tag rescale_slope{0x0028, 0x1053};
inline constexpr tag patient_identity_removed{0x0012, 0x0062};
inline constexpr tag deidentification_method{0x0012, 0x0063};
inline constexpr tag pixel_data{0x7FE0, 0x0010};
inline constexpr tag item{0xFFFE, 0xE000};
inline constexpr tag item_delimitation{0xFFFE, 0xE00D};
inline constexpr tag sequence_delimitation{0xFFFE, 0xE0DD};
}  // namespace tags

}  // namespace deid::dicom

template <>
struct std::hash<deid::dicom::tag> {
    std::size_t operator()(const deid::dicom::tag& t) const noexcept {
        return std::hash<std::uint32_t>{}(t.combined());
    }
};
