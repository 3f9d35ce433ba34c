/**
 * @file dataset.hpp
 * @brief In-memory DICOM data set: an ordered tag -> element tree.
 *
 * Elements hold their value as the exact bytes read from (or to be written
 * to) the stream. Typed accessors decode on demand, so an untouched element
 * re-serializes to the bytes it was parsed from.
 */

#pragma once

#include "deid/dicom/tag.hpp"
#include "deid/dicom/vr.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace deid::dicom {

class dataset;

struct data_element {
    dicom::tag tag;
    dicom::vr vr = dicom::vr::UN;
    std::vector<std::uint8_t> bytes;  ///< value bytes, unused for SQ
    std::vector<dataset> items;       ///< SQ items
    bool undefined_length = false;    ///< SQ encoded with a sequence delimiter

    [[nodiscard]] bool is_sequence() const noexcept { return vr == dicom::vr::SQ; }
    [[nodiscard]] bool empty() const noexcept;

    [[nodiscard]] std::string_view raw_string() const noexcept {
        return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
    }
    /// Whole value with DICOM padding trimmed.
    [[nodiscard]] std::string value_string() const;
    /// Backslash-separated values, each with padding trimmed.
    [[nodiscard]] std::vector<std::string> strings() const;

    /// Binary integers (US, SS, UL, SL) or IS strings.
    [[nodiscard]] std::vector<std::int64_t> integers() const;
    /// Binary floats, DS, IS or binary integers.
    [[nodiscard]] std::vector<double> decimals() const;

    /// Replace the value with text, padded to even length for the VR.
    void set_string(std::string_view value);
    void set_strings(std::span<const std::string> values);
    void set_bytes(std::vector<std::uint8_t> value);
    void clear_value();

    /// Drop delimiter-based encoding for this sequence and its items, so
    /// the writer emits explicit lengths.
    void normalize_lengths();

    friend bool operator==(const data_element&, const data_element&);
};

class dataset {
public:
    using map_type = std::map<dicom::tag, data_element>;
    using iterator = map_type::iterator;
    using const_iterator = map_type::const_iterator;

    /// Item encoded with an item delimiter (only meaningful for SQ items).
    bool undefined_length_item = false;

    [[nodiscard]] iterator begin() noexcept { return elements_.begin(); }
    [[nodiscard]] iterator end() noexcept { return elements_.end(); }
    [[nodiscard]] const_iterator begin() const noexcept { return elements_.begin(); }
    [[nodiscard]] const_iterator end() const noexcept { return elements_.end(); }
    [[nodiscard]] std::size_t size() const noexcept { return elements_.size(); }
    [[nodiscard]] bool empty() const noexcept { return elements_.empty(); }

    [[nodiscard]] bool contains(dicom::tag t) const { return elements_.contains(t); }
    [[nodiscard]] const data_element* find(dicom::tag t) const;
    [[nodiscard]] data_element* find(dicom::tag t);

    /// Insert or replace.
    data_element& set(data_element element);
    data_element& set_string(dicom::tag t, dicom::vr v, std::string_view value);
    bool erase(dicom::tag t) { return elements_.erase(t) != 0; }

    /// Trimmed string value, nullopt when absent.
    [[nodiscard]] std::optional<std::string> get_string(dicom::tag t) const;
    [[nodiscard]] std::optional<std::int64_t> get_int(dicom::tag t) const;
    [[nodiscard]] std::optional<double> get_decimal(dicom::tag t) const;

    /// Number of elements including those nested in sequence items.
    [[nodiscard]] std::size_t recursive_size() const;

    friend bool operator==(const dataset&, const dataset&) = default;

private:
    map_type elements_;
};

/// Location of an element inside nested sequences.
struct element_path {
    struct step {
        dicom::tag sequence;
        std::size_t item = 0;
        friend bool operator==(const step&, const step&) = default;
    };
    std::vector<step> parents;
    dicom::tag leaf;

    /// "(0008,1140)[0].(0008,1155)"
    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] std::size_t depth() const noexcept { return parents.size(); }
    friend bool operator==(const element_path&, const element_path&) = default;
};

/// Pre-order walk over every element, descending into sequence items.
void walk(const dataset& ds, const std::function<void(const element_path&, const data_element&)>& fn);
void walk(dataset& ds, const std::function<void(const element_path&, data_element&)>& fn);

/// Resolve a path produced by walk().
[[nodiscard]] data_element* resolve(dataset& ds, const element_path& path);
[[nodiscard]] const data_element* resolve(const dataset& ds, const element_path& path);

}  // namespace deid::dicom
