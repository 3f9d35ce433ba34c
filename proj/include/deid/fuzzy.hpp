/**
 * @file fuzzy.hpp
 * @brief Percentage similarity between free text and harvested sensitive values.
 *
 * Scores follow the 0..100 scale of the common fuzzy-matching packages:
 * round(100 * (1 - levenshtein / max_length)) over normalized strings
 * (case folded, whitespace collapsed). A match is positive only when the
 * score is strictly greater than the threshold.
 */

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deid::fuzzy {

inline constexpr int default_threshold = 49;

/// Values shorter than this are matched by exact token equality only.
inline constexpr std::size_t min_fuzzy_length = 3;

[[nodiscard]] std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// Score from a distance and the longer length. Both zero yields 100.
[[nodiscard]] int ratio_from_distance(std::size_t distance, std::size_t longest) noexcept;

[[nodiscard]] int similarity(std::string_view a, std::string_view b);

/// Best score of `needle` against every window of haystack words holding
/// as many words as the needle, never lower than the plain similarity.
[[nodiscard]] int partial_similarity(std::string_view needle, std::string_view haystack);

struct match {
    std::string value;
    int score = 0;

    friend bool operator==(const match&, const match&) = default;
};

/// Every candidate whose partial similarity against `text` exceeds
/// `threshold`, best first (ties: longer value first). Empty candidates never match; candidates
/// shorter than min_fuzzy_length match only as an exact word of the text.
[[nodiscard]] std::vector<match> match_sensible(std::string_view text,
                                                std::span<const std::string> candidates,
                                                int threshold = default_threshold);

}  // namespace deid::fuzzy
