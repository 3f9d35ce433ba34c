#include "deid/dicom/tag.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace deid::dicom {

std::string tag::to_string() const {
    char buf[10];
    std::snprintf(buf, sizeof buf, "%04X,%04X", group, element);
    return buf;
}

namespace {

std::uint16_t parse_hex16(std::string_view text, std::string_view whole) {
    std::uint16_t value = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value, 16);
    if (text.size() != 4 || ec != std::errc{} || ptr != last) {
        throw std::invalid_argument("invalid tag '" + std::string(whole) + "'");
    }
    return value;
}

}  // namespace

tag tag::parse(std::string_view text) {
    const auto whole = text;
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (text.size() >= 2 && text.front() == '(' && text.back() == ')') {
        text = text.substr(1, text.size() - 2);
    }
    if (const auto comma = text.find(','); comma != std::string_view::npos) {
        return {parse_hex16(text.substr(0, comma), whole), parse_hex16(text.substr(comma + 1), whole)};
    }
    if (text.size() == 8) return {parse_hex16(text.substr(0, 4), whole), parse_hex16(text.substr(4), whole)};
    throw std::invalid_argument("invalid tag '" + std::string(whole) + "'");
}

}  // namespace deid::dicom
