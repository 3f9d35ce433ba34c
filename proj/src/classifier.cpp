#include "deid/classifier.hpp"

#include "deid/fuzzy.hpp"
#include "deid/text.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace deid::classifier {

using dicom::vr;

namespace {

constexpr std::string_view standard_uid_root = "1.2.840.10008.";
constexpr std::size_t excerpt_limit = 64;

std::string clip(std::string_view s) {
    if (s.size() <= excerpt_limit) return std::string(s);
    auto cut = excerpt_limit;
    // do not split a UTF-8 sequence
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0U) == 0x80U) --cut;
    return std::string(s.substr(0, cut));
}

bool printable(std::string_view bytes) {
    bytes = text::trim_padding(bytes);
    if (bytes.empty()) return false;
    return std::all_of(bytes.begin(), bytes.end(), [](char ch) {
        const auto c = static_cast<unsigned char>(ch);
        return c >= 0x20U ? c != 0x7FU : (c == '\t' || c == '\n' || c == '\r');
    });
}

std::vector<std::u32string> phrase_of(std::string_view keyword) {
    std::vector<std::u32string> out;
    for (auto& p : text::word_parts(text::tokenize(keyword))) out.push_back(std::move(p.folded));
    return out;
}

bool phrase_at(const std::vector<text::token>& parts, std::size_t i, const std::vector<std::u32string>& phrase) {
    if (phrase.empty() || i + phrase.size() > parts.size()) return false;
    for (std::size_t k = 0; k < phrase.size(); ++k) {
        if (parts[i + k].folded != phrase[k]) return false;
    }
    return true;
}

bool starts_capitalized(const std::u32string& raw) {
    for (const char32_t c : raw) {
        if (text::is_alpha(c)) return text::is_upper(c);
    }
    return false;
}

bool is_phone_separator(char32_t c) { return c == U'-' || c == U'.' || c == U' ' || c == U'/'; }

/// A run of at least five digits, separators allowed between them, starting
/// right after `from` (spaces and opening punctuation skipped).
bool digit_run_after(const std::u32string& chars, std::size_t from) {
    std::size_t i = from;
    while (i < chars.size() && !text::is_alpha(chars[i]) && !text::is_digit(chars[i])) ++i;
    std::size_t digits = 0;
    while (i < chars.size()) {
        if (text::is_digit(chars[i])) {
            ++digits;
        } else if (!is_phone_separator(chars[i]) && chars[i] != U'(' && chars[i] != U')') {
            break;
        }
        ++i;
    }
    return digits >= 5;
}

/// Rule 7 test for the word following parts[end - 1].
bool followed_by_person(const text::tokenized_text& t, const std::vector<text::token>& parts, std::size_t end) {
    if (end == 0) return false;
    if (digit_run_after(t.chars, parts[end - 1].end)) return true;
    return end < parts.size() && starts_capitalized(parts[end].raw);
}

std::string excerpt_of(const text::tokenized_text& t, const std::vector<text::token>& parts, std::size_t first,
                       std::size_t last) {
    last = std::min(last, parts.size() - 1);
    return clip(text::encode_utf8(std::u32string_view(t.chars).substr(parts[first].begin, parts[last].end - parts[first].begin)));
}

bool is_standard_uid(std::string_view uid) { return uid.starts_with(standard_uid_root); }

}  // namespace

std::string_view to_string(category c) noexcept {
    switch (c) {
        case category::identity: return "Identity";
        case category::date_time: return "DateTime";
        case category::uid: return "Uid";
        case category::sensible_match: return "SensibleMatch";
        case category::institution: return "Institution";
        case category::geographic: return "Geographic";
        case category::person_context: return "PersonContext";
        case category::private_tag: return "Private";
        case category::clean: return "Clean";
    }
    return "Clean";
}

std::string_view to_string(keyword_pool p) noexcept {
    switch (p) {
        case keyword_pool::institution: return "institution";
        case keyword_pool::geographic: return "geographic";
        case keyword_pool::preposition: return "preposition";
    }
    return "institution";
}

std::optional<std::string> text_view(const dicom::data_element& el) {
    if (el.is_sequence()) return std::nullopt;
    if (dicom::is_string(el.vr)) return std::string(text::trim_padding(el.raw_string()));
    if (el.vr == vr::UN || el.vr == vr::OB) {
        if (printable(el.raw_string())) return std::string(text::trim_padding(el.raw_string()));
    }
    return std::nullopt;
}

bool is_structural(dicom::tag t) noexcept {
    if (t.is_group_length()) return true;
    switch (t.group) {
        case 0x0002:
        case 0x0028:
        case 0x7FE0: return true;
        default: break;
    }
    using namespace dicom::tags;
    return t == specific_character_set || t == dicom::tag{0x0008, 0x0008} || t == sop_class_uid || t == modality;
}

bool is_address_tag(dicom::tag t) noexcept {
    static constexpr dicom::tag address_tags[] = {
        {0x0008, 0x0081},  // InstitutionAddress
        {0x0008, 0x0092},  // ReferringPhysicianAddress
        {0x0010, 0x1040},  // PatientAddress
        {0x0010, 0x2150},  // CountryOfResidence
        {0x0010, 0x2152},  // RegionOfResidence
        {0x0038, 0x0300},  // CurrentPatientLocation
        {0x0040, 0x0243},  // PerformedLocation
    };
    return std::find(std::begin(address_tags), std::end(address_tags), t) != std::end(address_tags);
}

keyword_matcher::keyword_matcher(const config::keyword_lists& lists) {
    auto build = [](const std::vector<std::string>& words, auto& out) {
        for (const auto& w : words) {
            auto p = phrase_of(w);
            if (!p.empty()) out.emplace_back(std::move(p), w);
        }
    };
    build(lists.institution, institution_);
    build(lists.geographic, geographic_);
    build(lists.preposition, preposition_);
}

std::optional<keyword_matcher::hit> keyword_matcher::match(std::string_view value) const {
    const auto t = text::tokenize(value);
    const auto parts = text::word_parts(t);
    if (parts.empty()) return std::nullopt;

    auto first_keyword = [&](const auto& list, category kind) -> std::optional<hit> {
        // list order decides which keyword is reported
        for (const auto& [phrase, word] : list) {
            for (std::size_t i = 0; i < parts.size(); ++i) {
                if (phrase_at(parts, i, phrase)) {
                    return hit{kind, word, excerpt_of(t, parts, i, i + phrase.size())};
                }
            }
        }
        return std::nullopt;
    };
    if (auto h = first_keyword(institution_, category::institution)) return h;
    if (auto h = first_keyword(geographic_, category::geographic)) return h;

    for (std::size_t i = 0; i < parts.size(); ++i) {
        for (const auto& [phrase, word] : preposition_) {
            if (!phrase_at(parts, i, phrase)) continue;
            const auto end = i + phrase.size();
            if (followed_by_person(t, parts, end)) {
                const auto last = end < parts.size() ? end : end - 1;
                std::string excerpt = excerpt_of(t, parts, i, last);
                if (end >= parts.size() || !starts_capitalized(parts[end].raw)) {
                    excerpt = clip(text::encode_utf8(std::u32string_view(t.chars).substr(parts[i].begin)));
                }
                return hit{category::person_context, word, std::move(excerpt)};
            }
        }
    }
    return std::nullopt;
}

classification classify_element(const dicom::data_element& el, const dicom::element_path& path, const context& ctx) {
    classification c;
    c.path = path;
    c.tag = el.tag;
    c.vr = el.vr;

    if (is_structural(el.tag)) return c;

    const auto& sensible = ctx.cfg.sensible_tags;
    if (std::find(sensible.begin(), sensible.end(), el.tag) != sensible.end()) {
        c.kind = category::identity;
        c.why.rule = "sensible-tag";
        if (auto t = text_view(el)) c.excerpt = clip(*t);
        return c;
    }
    if (el.vr == vr::DA || el.vr == vr::DT || el.vr == vr::TM) {
        c.kind = category::date_time;
        c.why.rule = "vr:" + std::string(dicom::to_string(el.vr));
        c.excerpt = clip(el.value_string());
        return c;
    }
    if (el.vr == vr::UI) {
        const auto uids = el.strings();
        const bool remappable = std::any_of(uids.begin(), uids.end(),
                                            [](const std::string& u) { return !u.empty() && !is_standard_uid(u); });
        if (remappable) {
            c.kind = category::uid;
            c.why.rule = "vr:UI";
            c.excerpt = clip(el.value_string());
        }
        return c;
    }
    if (dicom::is_numeric(el.vr) || el.vr == vr::AT) return c;

    const auto value = text_view(el);
    if (!value || value->empty()) return c;

    const auto matches = fuzzy::match_sensible(*value, ctx.store.values(), ctx.cfg.similarity_threshold);
    if (!matches.empty()) {
        c.kind = category::sensible_match;
        c.why = {"sensible-value", {}, matches.front().value, matches.front().score};
        c.excerpt = clip(*value);
        return c;
    }
    if (auto h = ctx.keywords.match(*value)) {
        c.kind = h->kind;
        c.why.rule = "keyword";
        c.why.keyword = h->keyword;
        c.excerpt = std::move(h->excerpt);
        return c;
    }
    if (el.tag.is_private() && text::contains_letter(*value)) {
        c.kind = category::private_tag;
        c.why.rule = "private";
        c.excerpt = clip(*value);
    }
    return c;
}

std::vector<classification> classify_dataset(const dicom::dataset& ds, const context& ctx) {
    std::vector<classification> out;
    out.reserve(ds.recursive_size());
    dicom::walk(ds, [&](const dicom::element_path& path, const dicom::data_element& el) {
        out.push_back(classify_element(el, path, ctx));
    });
    return out;
}

std::vector<keyword_candidate> deep_search(const std::vector<corpus_document>& corpus,
                                           const sensible_value_store& seeds) {
    if (seeds.empty()) throw empty_seeds_error();

    struct seed {
        std::vector<std::u32string> parts;
        bool address = false;
    };
    std::map<std::string, std::vector<seed>, std::less<>> seeds_by_patient;
    for (const auto& [key, store] : seeds.patients()) {
        auto& list = seeds_by_patient[key];
        for (const auto& [value, tags] : store.entries()) {
            seed s{phrase_of(value), std::any_of(tags.begin(), tags.end(), is_address_tag)};
            if (!s.parts.empty()) list.push_back(std::move(s));
        }
    }

    using key = std::pair<std::string, keyword_pool>;
    std::map<key, keyword_candidate> found;
    auto record = [&](const std::u32string& word, keyword_pool pool, bool primary, const std::string& context) {
        auto w = text::encode_utf8(word);
        auto& c = found[{w, pool}];
        c.word = w;
        c.pool = pool;
        (primary ? c.primary : c.secondary) += 1;
        if (c.contexts.size() < 3 && std::find(c.contexts.begin(), c.contexts.end(), context) == c.contexts.end()) {
            c.contexts.push_back(context);
        }
    };
    auto usable = [](const std::u32string& w) {
        return w.size() >= 2 && std::any_of(w.begin(), w.end(), [](char32_t c) { return text::is_alpha(c); });
    };

    for (const auto& doc : corpus) {
        const auto it = seeds_by_patient.find(doc.patient_key);
        if (it == seeds_by_patient.end() || doc.data == nullptr) continue;
        const auto& patient_seeds = it->second;

        dicom::walk(*doc.data, [&](const dicom::element_path&, const dicom::data_element& el) {
            if (is_structural(el.tag) || el.vr == vr::DA || el.vr == vr::DT || el.vr == vr::TM || el.vr == vr::UI) {
                return;
            }
            const auto value = text_view(el);
            if (!value || value->empty()) return;
            const auto t = text::tokenize(*value);
            const auto parts = text::word_parts(t);
            if (parts.empty()) return;

            // (start, length, address) of every seed occurrence
            std::vector<std::tuple<std::size_t, std::size_t, bool>> occurrences;
            std::vector<bool> covered(parts.size(), false);
            for (const auto& s : patient_seeds) {
                for (std::size_t i = 0; i + s.parts.size() <= parts.size(); ++i) {
                    if (!phrase_at(parts, i, s.parts)) continue;
                    occurrences.emplace_back(i, s.parts.size(), s.address);
                    for (std::size_t k = 0; k < s.parts.size(); ++k) covered[i + k] = true;
                }
            }
            std::sort(occurrences.begin(), occurrences.end(), [](const auto& a, const auto& b) {
                if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
                if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
                return std::get<2>(a) && !std::get<2>(b);
            });

            std::set<std::size_t> seen_primary;
            for (const auto& [start, length, address] : occurrences) {
                std::size_t p = start;
                while (p > 0 && covered[p - 1]) --p;
                if (p == 0) continue;
                const std::size_t primary = p - 1;
                if (!seen_primary.insert(primary).second) continue;

                keyword_pool pool = keyword_pool::institution;
                if (address) pool = keyword_pool::geographic;
                else if (followed_by_person(t, parts, primary + 1)) pool = keyword_pool::preposition;

                std::u32string context;
                const bool has_secondary = primary > 0 && !covered[primary - 1];
                if (has_secondary) context += parts[primary - 1].folded + U" ";
                context += parts[primary].folded + U" <seed>";
                const auto ctx_text = text::encode_utf8(context);

                if (usable(parts[primary].folded)) record(parts[primary].folded, pool, true, ctx_text);
                if (has_secondary && usable(parts[primary - 1].folded)) {
                    record(parts[primary - 1].folded, pool, false, ctx_text);
                }
            }
        });
    }

    std::vector<keyword_candidate> out;
    out.reserve(found.size());
    for (auto& [_, c] : found) out.push_back(std::move(c));
    std::stable_sort(out.begin(), out.end(), [](const keyword_candidate& a, const keyword_candidate& b) {
        if (a.frequency() != b.frequency()) return a.frequency() > b.frequency();
        if ((a.primary > 0) != (b.primary > 0)) return a.primary > 0;
        if (a.word != b.word) return a.word < b.word;
        return a.pool < b.pool;
    });
    return out;
}

std::size_t append_candidates(config::keyword_lists& lists, const std::vector<keyword_candidate>& candidates,
                              std::size_t min_frequency, bool include_secondary) {
    std::size_t added = 0;
    for (const auto& c : candidates) {
        if (c.frequency() < min_frequency) continue;
        if (c.primary == 0 && !include_secondary) continue;
        auto& list = c.pool == keyword_pool::institution  ? lists.institution
                     : c.pool == keyword_pool::geographic ? lists.geographic
                                                          : lists.preposition;
        const auto word = text::normalize(c.word);
        if (std::find(list.begin(), list.end(), word) == list.end()) {
            list.push_back(word);
            ++added;
        }
    }
    return added;
}

}  // namespace deid::classifier
