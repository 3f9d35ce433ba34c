/**
 * @file store.hpp
 * @brief Sensitive values harvested per patient.
 *
 * Values are kept normalized (case folded, whitespace collapsed) together
 * with the tags they were harvested from. The same store, serialized as
 * JSON, seeds keyword training and drives the residual audit:
 *
 *   {"patients": {"<patient key>": [{"value": "doe", "tag": "0010,0010"}, ...]}}
 */

#pragma once

#include "deid/dicom/dataset.hpp"
#include "deid/dicom/tag.hpp"

#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deid {

/// Values of one patient.
class patient_store {
public:
    /// Adds an already normalized value. Values shorter than 2 characters
    /// are ignored. Returns true when the value was new.
    bool add(std::string value, dicom::tag source);
    void merge(const patient_store& other);

    [[nodiscard]] bool contains(std::string_view value) const;
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    /// Sorted, unique values.
    [[nodiscard]] std::span<const std::string> values() const noexcept { return values_; }
    [[nodiscard]] const std::set<dicom::tag>& sources(std::string_view value) const;
    [[nodiscard]] const std::map<std::string, std::set<dicom::tag>, std::less<>>& entries() const noexcept {
        return sources_;
    }

    friend bool operator==(const patient_store& a, const patient_store& b) { return a.sources_ == b.sources_; }

private:
    std::map<std::string, std::set<dicom::tag>, std::less<>> sources_;
    std::vector<std::string> values_;
};

class sensible_value_store {
public:
    patient_store& patient(const std::string& key) { return patients_[key]; }
    [[nodiscard]] const patient_store* find(std::string_view key) const;
    void merge(const sensible_value_store& other);

    [[nodiscard]] const std::map<std::string, patient_store, std::less<>>& patients() const noexcept {
        return patients_;
    }
    [[nodiscard]] std::size_t value_count() const noexcept;
    [[nodiscard]] bool empty() const noexcept { return value_count() == 0; }

    [[nodiscard]] std::string to_json() const;
    /// Values are normalized on load. Throws std::invalid_argument on a
    /// malformed document.
    [[nodiscard]] static sensible_value_store from_json(std::string_view text);

    friend bool operator==(const sensible_value_store&, const sensible_value_store&) = default;

private:
    std::map<std::string, patient_store, std::less<>> patients_;
};

/// Expand one raw value into the strings stored for it: the whole value,
/// its '^' components, the components joined by spaces, and its words.
/// Words ending in '.' (titles such as "dr.") are skipped.
[[nodiscard]] std::vector<std::string> expand_sensible_value(std::string_view raw);

/// Add the values of every present sensible tag, at any nesting depth, to
/// `out`. Values whose normalized form is in `placeholders` (replacement
/// defaults such as "anonymized") are ignored, so harvesting an already
/// de-identified file adds nothing.
void harvest_sensible_values(const dicom::dataset& ds, std::span<const dicom::tag> sensible_tags,
                             patient_store& out, std::span<const std::string> placeholders = {});

}  // namespace deid
