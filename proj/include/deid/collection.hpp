/**
 * @file collection.hpp
 * @brief Sort files into the patient / study / series / instance hierarchy.
 */

#pragma once

#include "deid/dicom/dataset.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace deid::collection {

/// Patient key used when (0010,0020) is absent or blank.
inline constexpr std::string_view unknown_patient = "UNKNOWN";

struct instance {
    std::string sop_uid;
    std::filesystem::path path;
    std::optional<std::int64_t> number;  ///< InstanceNumber

    friend bool operator==(const instance&, const instance&) = default;
};

struct series {
    std::vector<instance> instances;  ///< InstanceNumber, then SOP UID, then path
    friend bool operator==(const series&, const series&) = default;
};

struct study {
    std::map<std::string, collection::series> series;
    friend bool operator==(const study&, const study&) = default;
};

struct patient {
    std::map<std::string, collection::study> studies;
    friend bool operator==(const patient&, const patient&) = default;
};

struct counts {
    std::size_t patients = 0, studies = 0, series = 0, instances = 0;
    friend bool operator==(const counts&, const counts&) = default;
};

/// Same SOP Instance UID found at more than one path.
struct duplicate {
    std::string sop_uid;
    std::vector<std::filesystem::path> paths;
    friend bool operator==(const duplicate&, const duplicate&) = default;
};

struct hierarchy {
    std::map<std::string, patient> patients;

    [[nodiscard]] collection::counts counts() const;
    /// Every file, in hierarchy order.
    [[nodiscard]] std::vector<std::filesystem::path> files() const;
    /// Files grouped per patient key, in hierarchy order.
    [[nodiscard]] std::map<std::string, std::vector<std::filesystem::path>> files_by_patient() const;
    [[nodiscard]] std::vector<duplicate> duplicates() const;
    /// Paths relative to `root` when given.
    [[nodiscard]] nlohmann::json to_json(const std::filesystem::path& root = {}) const;

    friend bool operator==(const hierarchy&, const hierarchy&) = default;
};

struct skipped_file {
    std::filesystem::path path;
    std::string reason;
};

struct sort_result {
    collection::hierarchy hierarchy;
    std::vector<skipped_file> skipped;  ///< in input order
};

/// (0010,0020) trimmed, or "UNKNOWN".
[[nodiscard]] std::string patient_key(const dicom::dataset& ds);

/// "UNKNOWN-" plus a digest of the file bytes; stands in for missing UIDs.
[[nodiscard]] std::string sentinel_key(std::span<const std::uint8_t> file_bytes);

/// Regular files below `root`, sorted, skipping OCR fixture files
/// (`*.ocr.json`) and hidden files.
[[nodiscard]] std::vector<std::filesystem::path> scan_directory(const std::filesystem::path& root);

/// Read each file's header and place it. Per-file failures land in
/// `skipped`; nothing is thrown for a bad file.
[[nodiscard]] sort_result sort_collection(std::span<const std::filesystem::path> paths, unsigned threads = 1);

}  // namespace deid::collection
