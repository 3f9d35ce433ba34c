#include "deid/config.hpp"

#include "deid/dicom/dictionary.hpp"
#include "deid/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace deid::config {

using nlohmann::json;
using dicom::vr;

namespace {

constexpr std::array<std::pair<action_kind, std::string_view>, 8> action_names{{
    {action_kind::replace_default, "ReplaceDefault"},
    {action_kind::zero_length, "ZeroLength"},
    {action_kind::remove, "Remove"},
    {action_kind::keep, "Keep"},
    {action_kind::shift_date, "ShiftDate"},
    {action_kind::shift_time, "ShiftTime"},
    {action_kind::remap_uid, "RemapUID"},
    {action_kind::replace_with, "ReplaceWith"},
}};

std::optional<action_kind> parse_action_name(std::string_view name) {
    for (const auto& [kind, text] : action_names) {
        if (text == name) return kind;
    }
    return std::nullopt;
}

std::string_view engine_name(ocr_engine_kind k) {
    switch (k) {
        case ocr_engine_kind::mock: return "mock";
        case ocr_engine_kind::fixture: return "fixture";
        case ocr_engine_kind::sidecar: return "sidecar";
    }
    return "fixture";
}

std::string hex_upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

bool valid_uid_root(std::string_view root) {
    if (root.empty() || root.size() > 50) return false;
    std::size_t start = 0;
    while (true) {
        auto dot = root.find('.', start);
        auto part = root.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (part.empty()) return false;
        if (!std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; })) return false;
        if (part.size() > 1 && part.front() == '0') return false;
        if (dot == std::string_view::npos) return true;
        start = dot + 1;
    }
}

/// Collects every problem in the document before failing, so one run of
/// the loader reports all of them.
class problems {
public:
    void add(config_errc code, std::string message) {
        if (entries_.empty()) first_ = code;
        entries_.push_back(std::move(message));
    }
    void throw_if_any() const {
        if (!entries_.empty()) throw config_error(first_, entries_);
    }

private:
    config_errc first_ = config_errc::schema_error;
    std::vector<std::string> entries_;
};

class loader {
public:
    loader(load_mode mode, problems& errs, std::vector<std::string>& warnings, bool strict)
        : mode_(mode), errs_(errs), warnings_(warnings), strict_(strict) {}

    void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> known) {
        for (const auto& [key, _] : obj.items()) {
            if (std::find(known.begin(), known.end(), key) != known.end()) continue;
            std::string msg = "unknown key '" + std::string(where) + key + "'";
            if (strict_) errs_.add(config_errc::schema_error, msg);
            else warnings_.push_back(msg);
        }
    }

    template <typename T>
    std::optional<T> get(const json& obj, const char* key, std::string_view where) {
        auto it = obj.find(key);
        if (it == obj.end()) return std::nullopt;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw std::invalid_argument("bool");
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer()) throw std::invalid_argument("int");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) throw std::invalid_argument("string");
            }
            return it->get<T>();
        } catch (const std::exception&) {
            errs_.add(config_errc::schema_error, "'" + std::string(where) + key + "' has the wrong type");
            return std::nullopt;
        }
    }

    std::vector<std::string> string_list(const json& value, const std::string& name) {
        std::vector<std::string> out;
        if (!value.is_array()) {
            errs_.add(config_errc::schema_error, "'" + name + "' must be an array of strings");
            return out;
        }
        for (const auto& v : value) {
            if (!v.is_string()) {
                errs_.add(config_errc::schema_error, "'" + name + "' must contain only strings");
                continue;
            }
            out.push_back(v.get<std::string>());
        }
        return out;
    }

    void keywords(const json& doc, keyword_lists& out) {
        const json* kw = nullptr;
        if (auto it = doc.find("keywords"); it != doc.end()) {
            if (!it->is_object()) {
                errs_.add(config_errc::schema_error, "'keywords' must be an object");
            } else {
                kw = &*it;
                check_keys(*kw, "keywords.", {"institution", "geographic", "preposition"});
            }
        }
        const std::array<std::pair<const char*, std::vector<std::string>*>, 3> lists{{
            {"institution", &out.institution},
            {"geographic", &out.geographic},
            {"preposition", &out.preposition},
        }};
        const auto defaults = default_keyword_lists();
        const std::array<const std::vector<std::string>*, 3> fallback{&defaults.institution, &defaults.geographic,
                                                                      &defaults.preposition};
        std::vector<std::string> missing;
        for (std::size_t i = 0; i < lists.size(); ++i) {
            const auto [key, dest] = lists[i];
            std::string name = std::string("keywords.") + key;
            if (kw != nullptr && kw->contains(key)) {
                for (auto& word : string_list((*kw)[key], name)) {
                    auto n = text::normalize(word);
                    if (n.empty()) {
                        errs_.add(config_errc::schema_error, "'" + name + "' contains an empty keyword");
                        continue;
                    }
                    if (std::find(dest->begin(), dest->end(), n) == dest->end()) dest->push_back(std::move(n));
                }
            } else if (mode_ == load_mode::inspect) {
                *dest = *fallback[i];
            }
            if (mode_ == load_mode::deidentify && dest->empty()) missing.push_back(name);
        }
        if (!missing.empty()) {
            std::string msg = "missing or empty keyword lists:";
            for (const auto& m : missing) msg += " " + m;
            errs_.add(config_errc::schema_error, msg);
        }
    }

    std::optional<dicom::tag> parse_tag(const std::string& text, const std::string& where) {
        try {
            return dicom::tag::parse(text);
        } catch (const std::exception&) {
            errs_.add(config_errc::invalid_tag, "'" + where + "': malformed tag '" + text + "'");
            return std::nullopt;
        }
    }

    void actions(const json& value, std::map<tag_pattern, action_spec>& out) {
        if (!value.is_object()) {
            errs_.add(config_errc::schema_error, "'actions' must be an object");
            return;
        }
        for (const auto& [key, spec] : value.items()) {
            std::optional<tag_pattern> pattern;
            try {
                pattern = tag_pattern::parse(key);
            } catch (const std::exception&) {
                errs_.add(config_errc::invalid_tag, "'actions': malformed tag pattern '" + key + "'");
                continue;
            }
            std::optional<action_spec> action;
            if (spec.is_string()) {
                auto kind = parse_action_name(spec.get<std::string>());
                if (!kind || *kind == action_kind::replace_with) {
                    errs_.add(config_errc::invalid_action,
                              "'actions." + key + "': unknown action '" + spec.get<std::string>() + "'");
                    continue;
                }
                action = action_spec{*kind, {}};
            } else if (spec.is_object() && spec.size() == 1 && spec.contains("ReplaceWith") &&
                       spec["ReplaceWith"].is_string()) {
                action = action_spec{action_kind::replace_with, spec["ReplaceWith"].get<std::string>()};
            } else {
                errs_.add(config_errc::invalid_action, "'actions." + key +
                                                           "': expected an action name or {\"ReplaceWith\": string}");
                continue;
            }
            std::optional<vr> known_vr;
            if (pattern->type == tag_pattern::kind::vr_class) known_vr = pattern->vr;
            if (pattern->type == tag_pattern::kind::exact) known_vr = dicom::lookup_vr(pattern->tag);
            if (known_vr && !action_legal_for(action->kind, *known_vr)) {
                errs_.add(config_errc::invalid_action, "'actions." + key + "': " + std::string(to_string(action->kind)) +
                                                           " is not applicable to VR " +
                                                           std::string(dicom::to_string(*known_vr)));
                continue;
            }
            out[*pattern] = *action;
        }
    }

    void vr_defaults(const json& value, std::map<vr, std::string>& out) {
        if (!value.is_object()) {
            errs_.add(config_errc::schema_error, "'vrDefaults' must be an object");
            return;
        }
        for (const auto& [key, v] : value.items()) {
            auto code = dicom::parse_vr(key);
            if (!code) {
                errs_.add(config_errc::schema_error, "'vrDefaults': unknown VR '" + key + "'");
                continue;
            }
            if (!v.is_string()) {
                errs_.add(config_errc::schema_error, "'vrDefaults." + key + "' must be a string");
                continue;
            }
            out[*code] = v.get<std::string>();
        }
    }

    void ocr(const json& value, ocr_config& out) {
        if (!value.is_object()) {
            errs_.add(config_errc::schema_error, "'ocr' must be an object");
            return;
        }
        check_keys(value, "ocr.",
                   {"engine", "command", "margin", "modalities", "firstFrameOnly", "timeoutSeconds", "mockDetections"});
        if (auto e = get<std::string>(value, "engine", "ocr.")) {
            if (*e == "mock") out.engine = ocr_engine_kind::mock;
            else if (*e == "fixture") out.engine = ocr_engine_kind::fixture;
            else if (*e == "sidecar") out.engine = ocr_engine_kind::sidecar;
            else errs_.add(config_errc::schema_error, "'ocr.engine' must be mock, fixture or sidecar");
        }
        if (value.contains("command")) out.command = string_list(value["command"], "ocr.command");
        if (auto m = get<int>(value, "margin", "ocr.")) {
            if (*m < 0) errs_.add(config_errc::schema_error, "'ocr.margin' must be >= 0");
            else out.margin = *m;
        }
        if (value.contains("modalities")) {
            out.modalities.clear();
            for (auto& m : string_list(value["modalities"], "ocr.modalities")) out.modalities.push_back(hex_upper(m));
        }
        if (auto f = get<bool>(value, "firstFrameOnly", "ocr.")) out.first_frame_only = *f;
        if (auto t = get<int>(value, "timeoutSeconds", "ocr.")) {
            if (*t < 1) errs_.add(config_errc::schema_error, "'ocr.timeoutSeconds' must be >= 1");
            else out.timeout_seconds = *t;
        }
        if (auto it = value.find("mockDetections"); it != value.end()) {
            try {
                out.mock_detections = detections_from_json(*it);
            } catch (const std::exception& e) {
                errs_.add(config_errc::schema_error, std::string("'ocr.mockDetections': ") + e.what());
            }
        }
        if (out.engine == ocr_engine_kind::sidecar && out.command.empty()) {
            errs_.add(config_errc::schema_error, "'ocr.command' is required for the sidecar engine");
        }
    }

private:
    load_mode mode_;
    problems& errs_;
    std::vector<std::string>& warnings_;
    bool strict_;
};

}  // namespace

std::string_view to_string(action_kind k) noexcept {
    for (const auto& [kind, text] : action_names) {
        if (kind == k) return text;
    }
    return "Keep";
}

tag_pattern tag_pattern::parse(std::string_view text) {
    tag_pattern p;
    if (text == "private") {
        p.type = kind::private_class;
        return p;
    }
    if (text.starts_with("vr:")) {
        auto code = dicom::parse_vr(text.substr(3));
        if (!code) throw std::invalid_argument("unknown VR in pattern: " + std::string(text));
        p.type = kind::vr_class;
        p.vr = *code;
        return p;
    }
    if (text.size() == 9 && text[4] == ',') {
        auto elem = text.substr(5);
        if (elem == "xxxx" || elem == "XXXX") {
            p.type = kind::group;
            p.tag = dicom::tag{dicom::tag::parse(std::string(text.substr(0, 4)) + ",0000").group, 0};
            return p;
        }
    }
    p.type = kind::exact;
    p.tag = dicom::tag::parse(text);
    return p;
}

std::string tag_pattern::to_string() const {
    switch (type) {
        case kind::exact: return tag.to_string();
        case kind::group: return tag.to_string().substr(0, 5) + "xxxx";
        case kind::vr_class: return "vr:" + std::string(dicom::to_string(vr));
        case kind::private_class: return "private";
    }
    return {};
}

bool tag_pattern::matches(dicom::tag t, dicom::vr v) const noexcept {
    switch (type) {
        case kind::exact: return t == tag;
        case kind::group: return t.group == tag.group;
        case kind::vr_class: return v == vr;
        case kind::private_class: return t.is_private();
    }
    return false;
}

int tag_pattern::specificity() const noexcept {
    switch (type) {
        case kind::exact: return 4;
        case kind::group: return 3;
        case kind::vr_class: return 2;
        case kind::private_class: return 1;
    }
    return 0;
}

bool operator==(const config& a, const config& b) {
    return a.keywords == b.keywords && a.sensible_tags == b.sensible_tags && a.custom_actions == b.custom_actions &&
           a.vr_defaults == b.vr_defaults && a.date_shift_days == b.date_shift_days &&
           a.time_shift_seconds == b.time_shift_seconds && a.uid_root == b.uid_root &&
           a.similarity_threshold == b.similarity_threshold && a.ocr == b.ocr && a.strictness == b.strictness &&
           a.cap_age_90 == b.cap_age_90 && a.per_patient_shift_salt == b.per_patient_shift_salt &&
           a.per_patient_shift_max_days == b.per_patient_shift_max_days;
}

namespace {

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += "; ";
        out += p;
    }
    return out;
}

}  // namespace

config_error::config_error(config_errc code, std::vector<std::string> problems)
    : std::runtime_error(join(problems)), code_(code), problems_(std::move(problems)) {}

keyword_lists default_keyword_lists() {
    return {
        {"clinic", "hospital", "department", "medical", "university", "uiversity", "clinician", "hospice", "memorial",
         "follow up"},
        {"street", "road", "route", "avenue", "straße", "allee", "via", "corso"},
        {"for", "to", "on", "call", "at", "by", "prof", "dr"},
    };
}

std::vector<dicom::tag> default_sensible_tags() {
    using namespace dicom::tags;
    return {study_date,
            series_date,
            referring_physician_name,
            physicians_of_record,
            performing_physician_name,
            operators_name,
            patient_name,
            patient_id,
            patient_birth_date,
            dicom::tag{0x0040, 0x0075},
            dicom::tag{0x0040, 0xA075}};
}

std::map<vr, std::string> default_vr_defaults() {
    std::map<vr, std::string> out{
        {vr::DT, "00010101010101"},
        {vr::TM, "000000.000000"},
        {vr::DA, "00010101"},
    };
    for (auto v : {vr::LO, vr::LT, vr::SH, vr::PN, vr::CS, vr::ST, vr::UT, vr::UN}) out[v] = "Anonymized";
    for (auto v : {vr::FD, vr::FL, vr::SS, vr::US, vr::SL, vr::UL, vr::DS, vr::IS}) out[v] = "0";
    return out;
}

std::map<tag_pattern, action_spec> default_custom_actions() {
    auto vr_pattern = [](vr v) {
        tag_pattern p;
        p.type = tag_pattern::kind::vr_class;
        p.vr = v;
        return p;
    };
    tag_pattern age;
    age.tag = dicom::tags::patient_age;
    return {
        {vr_pattern(vr::DA), {action_kind::shift_date, {}}},
        {vr_pattern(vr::DT), {action_kind::shift_date, {}}},
        {vr_pattern(vr::TM), {action_kind::shift_time, {}}},
        {vr_pattern(vr::UI), {action_kind::remap_uid, {}}},
        {age, {action_kind::keep, {}}},
    };
}

bool action_legal_for(action_kind a, vr v) noexcept {
    switch (a) {
        case action_kind::shift_date: return v == vr::DA || v == vr::DT;
        case action_kind::shift_time: return v == vr::TM || v == vr::DT;
        case action_kind::remap_uid: return v == vr::UI;
        default: return true;
    }
}

config load_config(std::string_view json_text, load_mode mode, std::optional<dicom::strictness> strictness_override) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw config_error(config_errc::schema_error, {std::string("invalid JSON: ") + e.what()});
    }
    if (!doc.is_object()) throw config_error(config_errc::schema_error, {"top level must be a JSON object"});

    config c;
    problems errs;

    if (auto it = doc.find("strictness"); it != doc.end()) {
        if (*it == "strict") c.strictness = dicom::strictness::strict;
        else if (*it == "lenient") c.strictness = dicom::strictness::lenient;
        else errs.add(config_errc::schema_error, "'strictness' must be \"strict\" or \"lenient\"");
    }
    if (strictness_override) c.strictness = *strictness_override;

    loader ld(mode, errs, c.warnings, c.strictness == dicom::strictness::strict);
    ld.check_keys(doc, "",
                  {"keywords", "sensibleTags", "actions", "vrDefaults", "dateShiftDays", "timeShiftSeconds", "uidRoot",
                   "similarityThreshold", "ocr", "strictness", "capAge90", "perPatientShiftSalt",
                   "perPatientShiftMaxDays"});

    ld.keywords(doc, c.keywords);

    if (auto it = doc.find("sensibleTags"); it != doc.end()) {
        for (const auto& s : ld.string_list(*it, "sensibleTags")) {
            if (auto t = ld.parse_tag(s, "sensibleTags")) {
                if (std::find(c.sensible_tags.begin(), c.sensible_tags.end(), *t) == c.sensible_tags.end()) {
                    c.sensible_tags.push_back(*t);
                }
            }
        }
    } else {
        c.sensible_tags = default_sensible_tags();
    }

    c.custom_actions = default_custom_actions();
    if (auto it = doc.find("actions"); it != doc.end()) ld.actions(*it, c.custom_actions);

    c.vr_defaults = default_vr_defaults();
    if (auto it = doc.find("vrDefaults"); it != doc.end()) ld.vr_defaults(*it, c.vr_defaults);

    if (auto v = ld.get<int>(doc, "dateShiftDays", "")) c.date_shift_days = *v;
    if (auto v = ld.get<std::int64_t>(doc, "timeShiftSeconds", "")) c.time_shift_seconds = *v;
    if (auto v = ld.get<std::string>(doc, "uidRoot", "")) {
        if (!valid_uid_root(*v)) {
            errs.add(config_errc::schema_error,
                     "'uidRoot' must be dotted decimal without leading zeros and at most 50 characters");
        } else {
            c.uid_root = *v;
        }
    }
    if (auto v = ld.get<int>(doc, "similarityThreshold", "")) {
        if (*v < 0 || *v > 100) errs.add(config_errc::schema_error, "'similarityThreshold' must be in [0,100]");
        else c.similarity_threshold = *v;
    }
    if (auto it = doc.find("ocr"); it != doc.end()) ld.ocr(*it, c.ocr);
    if (auto v = ld.get<bool>(doc, "capAge90", "")) c.cap_age_90 = *v;
    if (auto v = ld.get<std::string>(doc, "perPatientShiftSalt", "")) c.per_patient_shift_salt = *v;
    if (auto v = ld.get<int>(doc, "perPatientShiftMaxDays", "")) {
        if (*v < 1) errs.add(config_errc::schema_error, "'perPatientShiftMaxDays' must be >= 1");
        else c.per_patient_shift_max_days = *v;
    }

    errs.throw_if_any();
    return c;
}

config load_config_file(const std::string& path, load_mode mode, std::optional<dicom::strictness> strictness_override) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error(config_errc::schema_error, {"cannot read config file '" + path + "'"});
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_config(buf.str(), mode, strictness_override);
}

std::string serialize(const config& c) {
    json doc;
    doc["keywords"] = {
        {"institution", c.keywords.institution},
        {"geographic", c.keywords.geographic},
        {"preposition", c.keywords.preposition},
    };
    json tags = json::array();
    for (auto t : c.sensible_tags) tags.push_back(t.to_string());
    doc["sensibleTags"] = tags;
    json actions = json::object();
    for (const auto& [pattern, spec] : c.custom_actions) {
        if (spec.kind == action_kind::replace_with) actions[pattern.to_string()] = {{"ReplaceWith", spec.value}};
        else actions[pattern.to_string()] = std::string(to_string(spec.kind));
    }
    doc["actions"] = actions;
    json defaults = json::object();
    for (const auto& [v, value] : c.vr_defaults) defaults[std::string(dicom::to_string(v))] = value;
    doc["vrDefaults"] = defaults;
    doc["dateShiftDays"] = c.date_shift_days;
    doc["timeShiftSeconds"] = c.time_shift_seconds;
    doc["uidRoot"] = c.uid_root;
    doc["similarityThreshold"] = c.similarity_threshold;
    json mock = json::array();
    for (const auto& d : c.ocr.mock_detections) mock.push_back(to_json(d));
    doc["ocr"] = {
        {"engine", engine_name(c.ocr.engine)},
        {"command", c.ocr.command},
        {"margin", c.ocr.margin},
        {"modalities", c.ocr.modalities},
        {"firstFrameOnly", c.ocr.first_frame_only},
        {"timeoutSeconds", c.ocr.timeout_seconds},
        {"mockDetections", mock},
    };
    doc["strictness"] = c.strictness == dicom::strictness::strict ? "strict" : "lenient";
    doc["capAge90"] = c.cap_age_90;
    if (c.per_patient_shift_salt) doc["perPatientShiftSalt"] = *c.per_patient_shift_salt;
    doc["perPatientShiftMaxDays"] = c.per_patient_shift_max_days;
    return doc.dump(2);
}

}  // namespace deid::config
