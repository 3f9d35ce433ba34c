#include "deid/fuzzy.hpp"

#include "deid/text.hpp"

#include <algorithm>
#include <numeric>

namespace deid::fuzzy {

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
    while (!a.empty() && !b.empty() && a.front() == b.front()) {
        a.remove_prefix(1);
        b.remove_prefix(1);
    }
    while (!a.empty() && !b.empty() && a.back() == b.back()) {
        a.remove_suffix(1);
        b.remove_suffix(1);
    }
    if (a.size() < b.size()) std::swap(a, b);
    if (b.empty()) return a.size();

    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diagonal = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t above = row[j];
            const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            row[j] = std::min({above + 1, row[j - 1] + 1, diagonal + cost});
            diagonal = above;
        }
    }
    return row[b.size()];
}

int ratio_from_distance(std::size_t distance, std::size_t longest) noexcept {
    if (longest == 0) return 100;
    // round half away from zero, in integers
    const std::size_t kept = longest - std::min(distance, longest);
    return static_cast<int>((200 * kept + longest) / (2 * longest));
}

namespace {

int score_chars(std::u32string_view a, std::u32string_view b) {
    return ratio_from_distance(levenshtein(a, b), std::max(a.size(), b.size()));
}

std::u32string join_words(const std::vector<std::u32string>& words, std::size_t first,
                          std::size_t count) {
    std::u32string out;
    for (std::size_t k = 0; k < count; ++k) {
        if (k) out.push_back(U' ');
        out += words[first + k];
    }
    return out;
}

int partial_chars(const std::u32string& needle, const std::u32string& haystack) {
    if (needle.empty()) return 100;
    int best = score_chars(needle, haystack);
    if (best == 100) return best;
    const auto needle_words = text::split_words(needle);
    const auto hay_words = text::split_words(haystack);
    const std::size_t k = needle_words.size();
    if (hay_words.size() < k) return best;
    for (std::size_t start = 0; start + k <= hay_words.size(); ++start) {
        best = std::max(best, score_chars(needle, join_words(hay_words, start, k)));
        if (best == 100) break;
    }
    return best;
}

}  // namespace

int similarity(std::string_view a, std::string_view b) {
    return score_chars(text::normalize_chars(a), text::normalize_chars(b));
}

int partial_similarity(std::string_view needle, std::string_view haystack) {
    return partial_chars(text::normalize_chars(needle), text::normalize_chars(haystack));
}

std::vector<match> match_sensible(std::string_view text, std::span<const std::string> candidates,
                                  int threshold) {
    std::vector<match> out;
    if (candidates.empty()) return out;
    const auto hay = text::normalize_chars(text);
    std::vector<std::u32string> hay_tokens;
    for (auto& t : text::tokenize(text).tokens) hay_tokens.push_back(std::move(t.folded));

    for (const auto& candidate : candidates) {
        const auto needle = text::normalize_chars(candidate);
        if (needle.empty()) continue;
        int score = 0;
        if (needle.size() < min_fuzzy_length) {
            if (std::find(hay_tokens.begin(), hay_tokens.end(), needle) != hay_tokens.end()) score = 100;
        } else {
            score = partial_chars(needle, hay);
        }
        if (score > threshold) out.push_back({candidate, score});
    }
    std::sort(out.begin(), out.end(), [](const match& x, const match& y) {
        if (x.score != y.score) return x.score > y.score;
        // equal scores: the longer (more specific) value first
        if (x.value.size() != y.value.size()) return x.value.size() > y.value.size();
        return x.value < y.value;
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace deid::fuzzy
