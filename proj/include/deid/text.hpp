/**
 * @file text.hpp
 * @brief Character decoding, case folding and tokenization shared by the
 *        classifier, the fuzzy matcher and the audit.
 *
 * DICOM string values are handled as bytes. For matching they are decoded
 * as UTF-8 when the bytes form valid UTF-8 and as Latin-1 otherwise, which
 * keeps German and Italian text intact in both encodings.
 */

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace deid::text {

/// Decode bytes as UTF-8, falling back to Latin-1 when the input is not valid UTF-8.
[[nodiscard]] std::u32string decode(std::string_view bytes);

[[nodiscard]] std::string encode_utf8(std::u32string_view chars);

/// Simple case fold: ASCII and the Latin-1 supplement. No locale, no
/// multi-character expansions ("ß" stays "ß").
[[nodiscard]] char32_t fold(char32_t c) noexcept;

[[nodiscard]] bool is_upper(char32_t c) noexcept;
[[nodiscard]] bool is_alpha(char32_t c) noexcept;
[[nodiscard]] bool is_digit(char32_t c) noexcept;
[[nodiscard]] bool is_space(char32_t c) noexcept;

[[nodiscard]] std::string fold_case(std::string_view bytes);

/// Fold case, trim, and collapse every whitespace run to a single space.
/// Output is UTF-8.
[[nodiscard]] std::u32string normalize_chars(std::string_view bytes);
[[nodiscard]] std::string normalize(std::string_view bytes);

/// Split a normalized string on single spaces.
[[nodiscard]] std::vector<std::u32string> split_words(std::u32string_view normalized);

struct token {
    std::u32string raw;     ///< as written
    std::u32string folded;  ///< case folded
    std::size_t begin = 0;  ///< offset into the decoded text
    std::size_t end = 0;
};

/// Decoded text together with its tokens.
struct tokenized_text {
    std::u32string chars;
    std::vector<token> tokens;
};

/// Tokens are maximal runs of letters and digits; '^', '.' and '-' are kept
/// when they occur inside a token and stripped at its edges. Everything
/// else (whitespace, punctuation, the DICOM '\' delimiter) separates.
[[nodiscard]] tokenized_text tokenize(std::string_view bytes);

/// Tokens split further at their inner joiners, so "Memorial^Hospital"
/// yields "Memorial" and "Hospital". Keyword matching works on these parts.
[[nodiscard]] std::vector<token> word_parts(const tokenized_text& text);

/// Trim trailing spaces and NULs (DICOM value padding) and leading spaces.
[[nodiscard]] std::string_view trim_padding(std::string_view value) noexcept;

[[nodiscard]] bool contains_letter(std::string_view bytes);

}  // namespace deid::text
