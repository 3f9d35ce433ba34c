/**
 * @file classifier.hpp
 * @brief Per-element classification and keyword mining.
 *
 * classify_element() assigns each header element exactly one category,
 * first hit wins:
 *   1. tag is a sensible tag                          -> identity
 *   2. VR is DA, DT or TM                             -> date_time
 *   3. VR is UI (outside the DICOM standard root)     -> uid
 *   4. text matches a harvested value above threshold -> sensible_match
 *   5. an institution keyword occurs                  -> institution
 *   6. a geographic keyword occurs                    -> geographic
 *   7. a preposition is followed by a capitalized word
 *      or a phone-like digit run                      -> person_context
 *   8. private tag whose value contains a letter      -> private_tag
 *   9. otherwise                                      -> clean
 *
 * Structural elements (pixel description, SOP class, character set,
 * modality, image type) are always clean so de-identification can never
 * make a file undecodable.
 */

#pragma once

#include "deid/config.hpp"
#include "deid/dicom/dataset.hpp"
#include "deid/store.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deid::classifier {

enum class category {
    identity,
    date_time,
    uid,
    sensible_match,
    institution,
    geographic,
    person_context,
    private_tag,
    clean,
};

[[nodiscard]] std::string_view to_string(category c) noexcept;

struct evidence {
    std::string rule;     ///< what fired, e.g. "sensible-tag", "keyword", "vr:DA"; empty for clean
    std::string keyword;  ///< matched keyword, if any
    std::string matched;  ///< matched harvested value, if any
    int score = 0;        ///< similarity score for sensible matches

    [[nodiscard]] bool empty() const noexcept { return rule.empty(); }
    friend bool operator==(const evidence&, const evidence&) = default;
};

struct classification {
    dicom::element_path path;
    dicom::tag tag;
    dicom::vr vr = dicom::vr::UN;
    category kind = category::clean;
    evidence why;
    std::string excerpt;  ///< offending substring

    friend bool operator==(const classification&, const classification&) = default;
};

/// Text to search for an element, or nullopt when it has none (binary,
/// numeric, sequence, or unprintable UN/private bytes).
[[nodiscard]] std::optional<std::string> text_view(const dicom::data_element& el);

[[nodiscard]] bool is_structural(dicom::tag t) noexcept;

/// Keyword lists pre-tokenized for matching. Build once per run.
class keyword_matcher {
public:
    explicit keyword_matcher(const config::keyword_lists& lists);

    struct hit {
        category kind = category::clean;
        std::string keyword;
        std::string excerpt;
    };

    /// Rules 5 to 7 applied to one text.
    [[nodiscard]] std::optional<hit> match(std::string_view text) const;

private:
    using phrase = std::vector<std::u32string>;
    std::vector<std::pair<phrase, std::string>> institution_;
    std::vector<std::pair<phrase, std::string>> geographic_;
    std::vector<std::pair<phrase, std::string>> preposition_;
};

/// Everything the classifier needs besides the element itself.
struct context {
    const config::config& cfg;
    const keyword_matcher& keywords;
    const patient_store& store;
};

[[nodiscard]] classification classify_element(const dicom::data_element& el, const dicom::element_path& path,
                                              const context& ctx);

/// One classification per element, nested items included, in walk order.
[[nodiscard]] std::vector<classification> classify_dataset(const dicom::dataset& ds, const context& ctx);

/// Header of one corpus file for keyword mining.
struct corpus_document {
    std::string patient_key;
    const dicom::dataset* data = nullptr;
};

enum class keyword_pool { institution, geographic, preposition };

[[nodiscard]] std::string_view to_string(keyword_pool p) noexcept;

struct keyword_candidate {
    std::string word;
    keyword_pool pool = keyword_pool::institution;
    std::size_t primary = 0;    ///< times seen immediately before a seed
    std::size_t secondary = 0;  ///< times seen one word further back
    std::vector<std::string> contexts;  ///< up to three examples, seeds masked

    [[nodiscard]] std::size_t frequency() const noexcept { return primary + secondary; }
};

class empty_seeds_error : public std::invalid_argument {
public:
    empty_seeds_error() : std::invalid_argument("deep search needs at least one seed value") {}
};

/// Mine the words that precede known sensitive values. Each document is
/// searched for the seeds of its own patient. Candidates are sorted by
/// frequency (descending), then words seen as primary first, then word.
[[nodiscard]] std::vector<keyword_candidate> deep_search(const std::vector<corpus_document>& corpus,
                                                         const sensible_value_store& seeds);

/// Append candidate words to the matching lists. Returns how many were new.
std::size_t append_candidates(config::keyword_lists& lists, const std::vector<keyword_candidate>& candidates,
                              std::size_t min_frequency = 1, bool include_secondary = false);

/// Tags whose values are addresses or places.
[[nodiscard]] bool is_address_tag(dicom::tag t) noexcept;

}  // namespace deid::classifier
