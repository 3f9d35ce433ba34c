/**
 * @file file.hpp
 * @brief DICOM Part-10 reading and writing.
 *
 * Supported transfer syntaxes are Implicit VR Little Endian and Explicit VR
 * Little Endian. Everything else is rejected with
 * errc::unsupported_transfer_syntax rather than parsed approximately.
 *
 * write_file(parse_file(bytes)) reproduces `bytes` exactly: sequence and
 * item delimitation is remembered per element, and lengths are recomputed
 * from content (which equals the stored length for untouched elements).
 */

#pragma once

#include "deid/dicom/dataset.hpp"
#include "deid/dicom/errors.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace deid::dicom {

enum class transfer_syntax { implicit_vr_little_endian, explicit_vr_little_endian };

namespace uids {
inline constexpr std::string_view implicit_vr_little_endian = "1.2.840.10008.1.2";
inline constexpr std::string_view explicit_vr_little_endian = "1.2.840.10008.1.2.1";
}  // namespace uids

[[nodiscard]] std::string_view transfer_syntax_uid(transfer_syntax ts) noexcept;

struct dicom_file {
    std::array<std::uint8_t, 128> preamble{};
    bool has_preamble = true;  ///< false for bare data sets without "DICM"
    dataset meta;              ///< group 0002, always explicit VR little endian
    dataset data;
    transfer_syntax syntax = transfer_syntax::explicit_vr_little_endian;
    std::filesystem::path source_path;
};

struct parse_options {
    /// Stop at the first element of group 7FE0 (header-only reads).
    bool stop_before_pixel_data = false;
};

enum class strictness { strict, lenient };

struct write_options {
    /// Values too long for a 16-bit explicit length: strict throws
    /// errc::value_too_long, lenient re-encodes the element as UN.
    dicom::strictness strictness = strictness::strict;
};

[[nodiscard]] dicom_file parse_file(std::span<const std::uint8_t> bytes, const parse_options& options = {});
[[nodiscard]] dicom_file read_file(const std::filesystem::path& path, const parse_options& options = {});

/// Parse a bare data set (no preamble, no file meta).
[[nodiscard]] dataset parse_dataset(std::span<const std::uint8_t> bytes, transfer_syntax ts);

[[nodiscard]] std::vector<std::uint8_t> write_file(const dicom_file& file, const write_options& options = {});
[[nodiscard]] std::vector<std::uint8_t> write_dataset(const dataset& ds, transfer_syntax ts,
                                                      const write_options& options = {});

/// Build a file around a data set with freshly generated file meta.
[[nodiscard]] dicom_file make_file(dataset data, transfer_syntax ts);

[[nodiscard]] std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace deid::dicom
