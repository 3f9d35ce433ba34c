/**
 * @file audit.hpp
 * @brief Look for sensitive values that survived de-identification.
 *
 * A target is one (store value, file) pair where the value can be found in
 * the original file's header text. It counts as removed when the same
 * value can no longer be found anywhere in the de-identified counterpart.
 * Person names in the store are expanded into their components and words
 * first, so a store of whole values ("DOE^JOHN") also finds "JOHN DOE".
 * Dates, times and UIDs are not searched: they are shifted or remapped,
 * never matched as text.
 */

#pragma once

#include "deid/ocr.hpp"
#include "deid/store.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace deid::audit {

struct finding {
    std::string file;      ///< path relative to the audited directories
    std::string location;  ///< tag path, or "frame N box x0,y0,x1,y1"
    std::string value_hash;
    int score = 0;
};

struct audit_score {
    std::size_t total_targets = 0;
    std::size_t removed = 0;
    /// 100 * removed / total_targets; 100 when there are no targets.
    [[nodiscard]] double percent() const noexcept;
};

class missing_counterpart : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct options {
    int threshold = 49;
    unsigned threads = 1;
    std::string hash_salt;
    /// Re-run OCR on original and de-identified frames as well.
    ocr::engine_pool* pixels = nullptr;
    bool strict = false;  ///< throw missing_counterpart instead of listing it
};

struct result {
    std::vector<finding> findings;
    audit_score score;
    std::vector<std::string> missing;     ///< originals without a counterpart
    std::vector<std::string> unreadable;  ///< originals or counterparts that failed to parse

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Header text the audit searches, per element path.
[[nodiscard]] std::vector<std::pair<std::string, std::string>> searchable_text(const dicom::dataset& ds);

/// Compare every file under `original` with the file at the same relative
/// path under `deidentified`.
[[nodiscard]] result scan_residual(const std::filesystem::path& original, const std::filesystem::path& deidentified,
                                   const sensible_value_store& store, const options& opts);

}  // namespace deid::audit
