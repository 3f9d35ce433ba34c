#pragma once

#include "deid/dicom/tag.hpp"
#include "deid/dicom/vr.hpp"

#include <optional>
#include <string_view>

namespace deid::dicom {

/// VR of a standard attribute, used to decode implicit VR data sets.
/// Unknown and private tags yield nullopt (callers treat them as UN).
[[nodiscard]] std::optional<vr> lookup_vr(tag t) noexcept;

/// Attribute keyword for reports ("PatientName"), empty when unknown.
[[nodiscard]] std::string_view lookup_keyword(tag t) noexcept;

}  // namespace deid::dicom
