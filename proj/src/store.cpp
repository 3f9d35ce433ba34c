#include "deid/store.hpp"

#include "deid/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>

namespace deid {

namespace {

const std::set<dicom::tag> no_sources;

std::size_t char_count(std::string_view utf8) { return text::decode(utf8).size(); }

}  // namespace

bool patient_store::add(std::string value, dicom::tag source) {
    if (char_count(value) < 2) return false;
    auto [it, inserted] = sources_.try_emplace(value);
    it->second.insert(source);
    if (inserted) values_.insert(std::lower_bound(values_.begin(), values_.end(), value), std::move(value));
    return inserted;
}

void patient_store::merge(const patient_store& other) {
    for (const auto& [value, tags] : other.sources_) {
        for (auto t : tags) add(value, t);
    }
}

bool patient_store::contains(std::string_view value) const { return sources_.find(value) != sources_.end(); }

const std::set<dicom::tag>& patient_store::sources(std::string_view value) const {
    auto it = sources_.find(value);
    return it == sources_.end() ? no_sources : it->second;
}

const patient_store* sensible_value_store::find(std::string_view key) const {
    auto it = patients_.find(key);
    return it == patients_.end() ? nullptr : &it->second;
}

void sensible_value_store::merge(const sensible_value_store& other) {
    for (const auto& [key, values] : other.patients_) patients_[key].merge(values);
}

std::size_t sensible_value_store::value_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [_, p] : patients_) n += p.size();
    return n;
}

std::string sensible_value_store::to_json() const {
    nlohmann::json patients = nlohmann::json::object();
    for (const auto& [key, store] : patients_) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& [value, tags] : store.entries()) {
            for (auto t : tags) list.push_back({{"value", value}, {"tag", t.to_string()}});
        }
        patients[key] = std::move(list);
    }
    return nlohmann::json{{"patients", patients}}.dump(2);
}

sensible_value_store sensible_value_store::from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("store: invalid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("patients") || !doc["patients"].is_object()) {
        throw std::invalid_argument("store: expected {\"patients\": {...}}");
    }
    sensible_value_store out;
    for (const auto& [key, list] : doc["patients"].items()) {
        if (!list.is_array()) throw std::invalid_argument("store: patient '" + key + "' must map to an array");
        auto& p = out.patient(key);
        for (const auto& entry : list) {
            if (!entry.is_object() || !entry.contains("value") || !entry["value"].is_string()) {
                throw std::invalid_argument("store: entries need a string \"value\"");
            }
            dicom::tag source{};
            if (auto it = entry.find("tag"); it != entry.end() && it->is_string()) {
                source = dicom::tag::parse(it->get<std::string>());
            }
            p.add(text::normalize(entry["value"].get<std::string>()), source);
        }
    }
    return out;
}

std::vector<std::string> expand_sensible_value(std::string_view raw) {
    std::vector<std::string> out;
    auto push = [&](std::string v) {
        if (char_count(v) >= 2 && std::find(out.begin(), out.end(), v) == out.end()) out.push_back(std::move(v));
    };
    const auto whole = text::normalize(raw);
    if (whole.empty()) return out;
    push(whole);

    if (whole.find('^') != std::string::npos) {
        std::string joined;
        std::size_t start = 0;
        while (start <= whole.size()) {
            auto stop = whole.find('^', start);
            if (stop == std::string::npos) stop = whole.size();
            auto component = text::normalize(std::string_view(whole).substr(start, stop - start));
            if (!component.empty()) {
                if (!joined.empty()) joined += ' ';
                joined += component;
                if (component.back() != '.') push(component);
            }
            start = stop + 1;
        }
        push(joined);
    }

    for (const auto& word : text::split_words(text::decode(whole))) {
        auto w = text::encode_utf8(word);
        if (w.back() == '.') continue;
        push(w);
    }
    return out;
}

void harvest_sensible_values(const dicom::dataset& ds, std::span<const dicom::tag> sensible_tags,
                             patient_store& out, std::span<const std::string> placeholders) {
    dicom::walk(ds, [&](const dicom::element_path&, const dicom::data_element& el) {
        if (!dicom::is_string(el.vr) && el.vr != dicom::vr::UN) return;
        if (std::find(sensible_tags.begin(), sensible_tags.end(), el.tag) == sensible_tags.end()) return;
        for (const auto& value : el.strings()) {
            const auto normalized = text::normalize(value);
            if (normalized.empty()) continue;
            if (std::find(placeholders.begin(), placeholders.end(), normalized) != placeholders.end()) continue;
            for (auto& v : expand_sensible_value(value)) out.add(std::move(v), el.tag);
        }
    });
}

}  // namespace deid
