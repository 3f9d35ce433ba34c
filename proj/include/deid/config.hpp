/**
 * @file config.hpp
 * @brief Run parameters loaded from a single JSON document.
 *
 * The document carries the four input lists of the method (search
 * keywords, sensitive tags, action overrides, per-VR replacement values)
 * plus shift amounts, the UID root, the match threshold and OCR settings.
 * Unspecified fields take the defaults documented next to each member.
 *
 * Top-level keys:
 *   keywords{institution,geographic,preposition}, sensibleTags, actions,
 *   vrDefaults, dateShiftDays, timeShiftSeconds, uidRoot,
 *   similarityThreshold, ocr, strictness, capAge90,
 *   perPatientShiftSalt, perPatientShiftMaxDays
 */

#pragma once

#include "deid/detection.hpp"
#include "deid/dicom/file.hpp"
#include "deid/dicom/tag.hpp"
#include "deid/dicom/vr.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deid::config {

enum class action_kind { replace_default, zero_length, remove, keep, shift_date, shift_time, remap_uid, replace_with };

[[nodiscard]] std::string_view to_string(action_kind k) noexcept;

struct action_spec {
    action_kind kind = action_kind::keep;
    std::string value;  ///< only for replace_with

    friend bool operator==(const action_spec&, const action_spec&) = default;
};

/// Which elements a custom action applies to. Matching precedence:
/// exact tag > group wildcard ("0008,xxxx") > VR class ("vr:DA") > "private".
struct tag_pattern {
    enum class kind { exact, group, vr_class, private_class };

    kind type = kind::exact;
    dicom::tag tag;         ///< exact: full tag; group: only .group is used
    dicom::vr vr = dicom::vr::UN;

    [[nodiscard]] static tag_pattern parse(std::string_view text);
    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] bool matches(dicom::tag t, dicom::vr v) const noexcept;
    /// Higher wins.
    [[nodiscard]] int specificity() const noexcept;

    friend auto operator<=>(const tag_pattern&, const tag_pattern&) = default;
};

struct keyword_lists {
    std::vector<std::string> institution;
    std::vector<std::string> geographic;
    std::vector<std::string> preposition;

    friend bool operator==(const keyword_lists&, const keyword_lists&) = default;
};

enum class ocr_engine_kind { mock, fixture, sidecar };

struct ocr_config {
    ocr_engine_kind engine = ocr_engine_kind::fixture;
    std::vector<std::string> command;            ///< sidecar argv
    int margin = 2;                              ///< redaction box dilation, pixels
    std::vector<std::string> modalities{"DX", "CR", "MG"};  ///< "*" admits all
    bool first_frame_only = false;
    int timeout_seconds = 60;
    std::vector<detection> mock_detections;      ///< returned for every frame by the mock engine

    friend bool operator==(const ocr_config&, const ocr_config&) = default;
};

enum class load_mode {
    deidentify,  ///< keyword lists required
    inspect,     ///< keyword lists optional (sort, audit, train-keywords)
};

struct config {
    keyword_lists keywords;
    std::vector<dicom::tag> sensible_tags;           ///< default: the ten tags of default_sensible_tags()
    std::map<tag_pattern, action_spec> custom_actions;  ///< default: default_custom_actions()
    std::map<dicom::vr, std::string> vr_defaults;    ///< default: default_vr_defaults(); given keys override
    int date_shift_days = 0;                         ///< placeholder, the operator must choose
    std::int64_t time_shift_seconds = 0;
    std::string uid_root = "1.2.840.99999";          ///< placeholder, the operator must choose
    int similarity_threshold = 49;
    ocr_config ocr;
    dicom::strictness strictness = dicom::strictness::lenient;
    bool cap_age_90 = false;
    std::optional<std::string> per_patient_shift_salt;  ///< enables per-patient date offsets
    int per_patient_shift_max_days = 365;

    /// Non-fatal problems found while loading (unknown keys in lenient mode).
    std::vector<std::string> warnings;

    friend bool operator==(const config& a, const config& b);
};

enum class config_errc { schema_error, invalid_tag, invalid_action };

class config_error : public std::runtime_error {
public:
    config_error(config_errc code, std::vector<std::string> problems);
    [[nodiscard]] config_errc code() const noexcept { return code_; }
    [[nodiscard]] const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    config_errc code_;
    std::vector<std::string> problems_;
};

/// `strictness_override` replaces the document's own "strictness" before
/// unknown keys are judged (the CLI's --strict flag).
[[nodiscard]] config load_config(std::string_view json_text, load_mode mode = load_mode::deidentify,
                                 std::optional<dicom::strictness> strictness_override = std::nullopt);
[[nodiscard]] config load_config_file(const std::string& path, load_mode mode = load_mode::deidentify,
                                      std::optional<dicom::strictness> strictness_override = std::nullopt);
[[nodiscard]] std::string serialize(const config& c);

/// Context words that precede names, institutions, places and phone
/// numbers in medical free text. The institution list keeps both
/// "university" and the frequently seen misspelling "uiversity".
[[nodiscard]] keyword_lists default_keyword_lists();
[[nodiscard]] std::vector<dicom::tag> default_sensible_tags();
[[nodiscard]] std::map<dicom::vr, std::string> default_vr_defaults();
/// Shift DA/DT by days, TM by seconds, remap UI, keep PatientAge.
[[nodiscard]] std::map<tag_pattern, action_spec> default_custom_actions();

/// Whether `a` may be applied to an element of VR `v`.
[[nodiscard]] bool action_legal_for(action_kind a, dicom::vr v) noexcept;

}  // namespace deid::config
