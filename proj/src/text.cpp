#include "deid/text.hpp"

namespace deid::text {

namespace {

bool decode_utf8(std::string_view in, std::u32string& out) {
    out.clear();
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        const auto b0 = static_cast<unsigned char>(in[i]);
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
        }
        int extra = 0;
        char32_t cp = 0;
        if ((b0 & 0xE0) == 0xC0) {
            extra = 1;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            extra = 2;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            extra = 3;
            cp = b0 & 0x07;
        } else {
            return false;
        }
        if (i + static_cast<std::size_t>(extra) >= in.size()) return false;
        for (int k = 1; k <= extra; ++k) {
            const auto b = static_cast<unsigned char>(in[i + k]);
            if ((b & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (b & 0x3F);
        }
        // overlong forms and surrogates
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
            (extra == 3 && (cp < 0x10000 || cp > 0x10FFFF)) ||
            (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(extra) + 1;
    }
    return true;
}

bool is_joiner(char32_t c) noexcept { return c == U'^' || c == U'.' || c == U'-'; }

bool is_word(char32_t c) noexcept { return is_alpha(c) || is_digit(c); }

}  // namespace

std::u32string decode(std::string_view bytes) {
    std::u32string out;
    if (decode_utf8(bytes, out)) return out;
    out.clear();
    for (const char ch : bytes) out.push_back(static_cast<unsigned char>(ch));
    return out;
}

std::string encode_utf8(std::u32string_view chars) {
    std::string out;
    out.reserve(chars.size());
    for (const char32_t c : chars) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (c < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else if (c < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (c >> 12)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (c >> 18)));
            out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

bool is_upper(char32_t c) noexcept {
    return (c >= U'A' && c <= U'Z') || (c >= 0xC0 && c <= 0xDE && c != 0xD7);
}

char32_t fold(char32_t c) noexcept { return is_upper(c) ? c + 0x20 : c; }

bool is_alpha(char32_t c) noexcept {
    if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z')) return true;
    if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;
    // Greek, Cyrillic and beyond: treat as letters
    return c >= 0x370;
}

bool is_digit(char32_t c) noexcept { return c >= U'0' && c <= U'9'; }

bool is_space(char32_t c) noexcept {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' ||
           c == 0xA0 || c == 0;
}

std::string fold_case(std::string_view bytes) {
    auto chars = decode(bytes);
    for (auto& c : chars) c = fold(c);
    return encode_utf8(chars);
}

std::u32string normalize_chars(std::string_view bytes) {
    const auto chars = decode(bytes);
    std::u32string out;
    out.reserve(chars.size());
    bool pending_space = false;
    for (const char32_t c : chars) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(U' ');
            pending_space = false;
        }
        out.push_back(fold(c));
    }
    return out;
}

std::string normalize(std::string_view bytes) { return encode_utf8(normalize_chars(bytes)); }

std::vector<std::u32string> split_words(std::u32string_view normalized) {
    std::vector<std::u32string> words;
    std::size_t start = 0;
    while (start < normalized.size()) {
        auto stop = normalized.find(U' ', start);
        if (stop == std::u32string_view::npos) stop = normalized.size();
        if (stop > start) words.emplace_back(normalized.substr(start, stop - start));
        start = stop + 1;
    }
    return words;
}

tokenized_text tokenize(std::string_view bytes) {
    tokenized_text result;
    result.chars = decode(bytes);
    const auto& s = result.chars;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!is_word(s[i]) && !is_joiner(s[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && (is_word(s[j]) || is_joiner(s[j]))) ++j;
        std::size_t b = i;
        std::size_t e = j;
        while (b < e && is_joiner(s[b])) ++b;
        while (e > b && is_joiner(s[e - 1])) --e;
        if (e > b) {
            token t;
            t.raw = s.substr(b, e - b);
            t.folded = t.raw;
            for (auto& c : t.folded) c = fold(c);
            t.begin = b;
            t.end = e;
            result.tokens.push_back(std::move(t));
        }
        i = j;
    }
    return result;
}

std::vector<token> word_parts(const tokenized_text& text) {
    std::vector<token> parts;
    parts.reserve(text.tokens.size());
    for (const auto& t : text.tokens) {
        std::size_t start = 0;
        for (std::size_t i = 0; i <= t.raw.size(); ++i) {
            if (i < t.raw.size() && !is_joiner(t.raw[i])) continue;
            if (i > start) {
                token p;
                p.raw = t.raw.substr(start, i - start);
                p.folded = t.folded.substr(start, i - start);
                p.begin = t.begin + start;
                p.end = t.begin + i;
                parts.push_back(std::move(p));
            }
            start = i + 1;
        }
    }
    return parts;
}

std::string_view trim_padding(std::string_view value) noexcept {
    while (!value.empty() && (value.back() == ' ' || value.back() == '\0')) value.remove_suffix(1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    return value;
}

bool contains_letter(std::string_view bytes) {
    for (const char32_t c : decode(bytes)) {
        if (is_alpha(c)) return true;
    }
    return false;
}

}  // namespace deid::text
