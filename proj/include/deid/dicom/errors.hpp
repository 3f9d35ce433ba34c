#pragma once

#include <stdexcept>
#include <string>

namespace deid::dicom {

enum class errc {
    truncated_file,
    unsupported_transfer_syntax,
    invalid_magic,
    malformed_dataset,
    value_too_long,
    unsupported_pixel_format,
    size_mismatch,
};

[[nodiscard]] const char* to_string(errc code) noexcept;

class dicom_error : public std::runtime_error {
public:
    dicom_error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] errc code() const noexcept { return code_; }

private:
    errc code_;
};

}  // namespace deid::dicom
