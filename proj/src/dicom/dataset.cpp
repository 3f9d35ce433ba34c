#include "deid/dicom/dataset.hpp"

#include "deid/text.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace deid::dicom {

namespace {

template <typename T>
T load_le(const std::uint8_t* p) noexcept {
    T value;
    std::memcpy(&value, p, sizeof(T));  // host is little endian (checked in reader.cpp)
    return value;
}

std::optional<double> parse_decimal(std::string_view s) {
    s = text::trim_padding(s);
    if (s.empty()) return std::nullopt;
    std::string buf(s);
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (end == buf.c_str()) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_integer(std::string_view s) {
    s = text::trim_padding(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr == s.data()) return std::nullopt;
    return v;
}

void walk_impl(const dataset& ds, element_path& path,
               const std::function<void(const element_path&, const data_element&)>& fn) {
    for (const auto& [t, el] : ds) {
        path.leaf = t;
        fn(path, el);
        if (!el.is_sequence()) continue;
        for (std::size_t i = 0; i < el.items.size(); ++i) {
            path.parents.push_back({t, i});
            walk_impl(el.items[i], path, fn);
            path.parents.pop_back();
        }
    }
}

void walk_impl(dataset& ds, element_path& path,
               const std::function<void(const element_path&, data_element&)>& fn) {
    for (auto& [t, el] : ds) {
        path.leaf = t;
        fn(path, el);
        if (!el.is_sequence()) continue;
        for (std::size_t i = 0; i < el.items.size(); ++i) {
            path.parents.push_back({t, i});
            walk_impl(el.items[i], path, fn);
            path.parents.pop_back();
        }
    }
}

}  // namespace

bool data_element::empty() const noexcept { return is_sequence() ? items.empty() : bytes.empty(); }

std::string data_element::value_string() const { return std::string(text::trim_padding(raw_string())); }

std::vector<std::string> data_element::strings() const {
    std::vector<std::string> out;
    const auto raw = raw_string();
    if (text::trim_padding(raw).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto stop = raw.find('\\', start);
        out.emplace_back(text::trim_padding(raw.substr(start, stop == std::string_view::npos ? raw.npos : stop - start)));
        if (stop == std::string_view::npos) break;
        start = stop + 1;
    }
    return out;
}

std::vector<std::int64_t> data_element::integers() const {
    std::vector<std::int64_t> out;
    const auto* p = bytes.data();
    const std::size_t n = bytes.size();
    switch (vr) {
        case dicom::vr::US:
            for (std::size_t i = 0; i + 2 <= n; i += 2) out.push_back(load_le<std::uint16_t>(p + i));
            break;
        case dicom::vr::SS:
            for (std::size_t i = 0; i + 2 <= n; i += 2) out.push_back(load_le<std::int16_t>(p + i));
            break;
        case dicom::vr::UL:
            for (std::size_t i = 0; i + 4 <= n; i += 4) out.push_back(load_le<std::uint32_t>(p + i));
            break;
        case dicom::vr::SL:
            for (std::size_t i = 0; i + 4 <= n; i += 4) out.push_back(load_le<std::int32_t>(p + i));
            break;
        default:
            for (const auto& s : strings()) {
                if (auto v = parse_integer(s)) {
                    out.push_back(*v);
                } else if (auto d = parse_decimal(s)) {
                    out.push_back(static_cast<std::int64_t>(*d));
                }
            }
    }
    return out;
}

std::vector<double> data_element::decimals() const {
    std::vector<double> out;
    const auto* p = bytes.data();
    const std::size_t n = bytes.size();
    switch (vr) {
        case dicom::vr::FL:
            for (std::size_t i = 0; i + 4 <= n; i += 4) out.push_back(load_le<float>(p + i));
            return out;
        case dicom::vr::FD:
            for (std::size_t i = 0; i + 8 <= n; i += 8) out.push_back(load_le<double>(p + i));
            return out;
        case dicom::vr::US: case dicom::vr::SS: case dicom::vr::UL: case dicom::vr::SL:
            for (const auto v : integers()) out.push_back(static_cast<double>(v));
            return out;
        default:
            for (const auto& s : strings()) {
                if (auto v = parse_decimal(s)) out.push_back(*v);
            }
            return out;
    }
}

void data_element::set_string(std::string_view value) {
    bytes.assign(value.begin(), value.end());
    if (bytes.size() % 2 != 0) bytes.push_back(static_cast<std::uint8_t>(padding_byte(vr)));
}

void data_element::set_strings(std::span<const std::string> values) {
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) joined.push_back('\\');
        joined += values[i];
    }
    set_string(joined);
}

void data_element::set_bytes(std::vector<std::uint8_t> value) { bytes = std::move(value); }

void data_element::clear_value() {
    bytes.clear();
    items.clear();
    undefined_length = false;
}

void data_element::normalize_lengths() {
    undefined_length = false;
    for (auto& item : items) item.undefined_length_item = false;
}

bool operator==(const data_element& a, const data_element& b) {
    return a.tag == b.tag && a.vr == b.vr && a.bytes == b.bytes && a.items == b.items &&
           a.undefined_length == b.undefined_length;
}

const data_element* dataset::find(dicom::tag t) const {
    const auto it = elements_.find(t);
    return it == elements_.end() ? nullptr : &it->second;
}

data_element* dataset::find(dicom::tag t) {
    const auto it = elements_.find(t);
    return it == elements_.end() ? nullptr : &it->second;
}

data_element& dataset::set(data_element element) {
    const auto t = element.tag;
    return elements_.insert_or_assign(t, std::move(element)).first->second;
}

data_element& dataset::set_string(dicom::tag t, dicom::vr v, std::string_view value) {
    data_element el;
    el.tag = t;
    el.vr = v;
    el.set_string(value);
    return set(std::move(el));
}

std::optional<std::string> dataset::get_string(dicom::tag t) const {
    if (const auto* el = find(t)) return el->value_string();
    return std::nullopt;
}

std::optional<std::int64_t> dataset::get_int(dicom::tag t) const {
    if (const auto* el = find(t)) {
        const auto values = el->integers();
        if (!values.empty()) return values.front();
    }
    return std::nullopt;
}

std::optional<double> dataset::get_decimal(dicom::tag t) const {
    if (const auto* el = find(t)) {
        const auto values = el->decimals();
        if (!values.empty()) return values.front();
    }
    return std::nullopt;
}

std::size_t dataset::recursive_size() const {
    std::size_t n = 0;
    walk(*this, [&n](const element_path&, const data_element&) { ++n; });
    return n;
}

std::string element_path::to_string() const {
    std::string out;
    for (const auto& s : parents) {
        out += "(" + s.sequence.to_string() + ")[" + std::to_string(s.item) + "].";
    }
    out += "(" + leaf.to_string() + ")";
    return out;
}

void walk(const dataset& ds, const std::function<void(const element_path&, const data_element&)>& fn) {
    element_path path;
    walk_impl(ds, path, fn);
}

void walk(dataset& ds, const std::function<void(const element_path&, data_element&)>& fn) {
    element_path path;
    walk_impl(ds, path, fn);
}

data_element* resolve(dataset& ds, const element_path& path) {
    dataset* current = &ds;
    for (const auto& s : path.parents) {
        auto* sq = current->find(s.sequence);
        if (sq == nullptr || s.item >= sq->items.size()) return nullptr;
        current = &sq->items[s.item];
    }
    return current->find(path.leaf);
}

const data_element* resolve(const dataset& ds, const element_path& path) {
    return resolve(const_cast<dataset&>(ds), path);
}

}  // namespace deid::dicom
