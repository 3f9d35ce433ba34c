#include "deid/dicom/vr.hpp"

#include <array>

namespace deid::dicom {

namespace {

constexpr std::array<std::string_view, 34> codes{
    "AE", "AS", "AT", "CS", "DA", "DS", "DT", "FD", "FL", "IS", "LO", "LT", "OB", "OD", "OF", "OL", "OV",
    "OW", "PN", "SH", "SL", "SQ", "SS", "ST", "SV", "TM", "UC", "UI", "UL", "UN", "UR", "US", "UT", "UV",
};

}  // namespace

std::string_view to_string(vr v) noexcept { return codes[static_cast<std::size_t>(v)]; }

std::optional<vr> parse_vr(std::string_view code) noexcept {
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] == code) return static_cast<vr>(i);
    }
    return std::nullopt;
}

bool has_long_length(vr v) noexcept {
    switch (v) {
        case vr::OB: case vr::OD: case vr::OF: case vr::OL: case vr::OV: case vr::OW:
        case vr::SQ: case vr::SV: case vr::UC: case vr::UN: case vr::UR: case vr::UT: case vr::UV:
            return true;
        default:
            return false;
    }
}

bool is_string(vr v) noexcept {
    switch (v) {
        case vr::AE: case vr::AS: case vr::CS: case vr::DA: case vr::DS: case vr::DT: case vr::IS:
        case vr::LO: case vr::LT: case vr::PN: case vr::SH: case vr::ST: case vr::TM: case vr::UC:
        case vr::UI: case vr::UR: case vr::UT:
            return true;
        default:
            return false;
    }
}

bool is_binary_numeric(vr v) noexcept { return binary_width(v) != 0 && v != vr::AT; }

bool is_numeric(vr v) noexcept { return is_binary_numeric(v) || v == vr::DS || v == vr::IS; }

bool is_temporal(vr v) noexcept { return v == vr::DA || v == vr::DT || v == vr::TM; }

std::size_t binary_width(vr v) noexcept {
    switch (v) {
        case vr::SS: case vr::US: return 2;
        case vr::SL: case vr::UL: case vr::FL: case vr::AT: return 4;
        case vr::FD: case vr::SV: case vr::UV: return 8;
        default: return 0;
    }
}

char padding_byte(vr v) noexcept { return v == vr::UI || v == vr::OB || v == vr::UN ? '\0' : ' '; }

}  // namespace deid::dicom
