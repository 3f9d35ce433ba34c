#include "deid/config.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

using namespace deid;
using namespace deid::config;
using dicom::vr;

namespace {

const char* minimal = R"({
  "keywords": {"institution": ["hospital"], "geographic": ["street"], "preposition": ["dr"]}
})";

bool has(const std::vector<std::string>& v, std::string_view s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST_CASE("omitted vrDefaults take the documented values") {
    auto c = load_config(minimal);
    CHECK(c.vr_defaults.at(vr::DA) == "00010101");
    CHECK(c.vr_defaults.at(vr::TM) == "000000.000000");
    CHECK(c.vr_defaults.at(vr::DT) == "00010101010101");
    CHECK(c.vr_defaults.at(vr::PN) == "Anonymized");
    for (auto v : {vr::LO, vr::LT, vr::SH, vr::PN, vr::CS, vr::ST, vr::UT, vr::UN}) CHECK(c.vr_defaults.at(v) == "Anonymized");
    for (auto v : {vr::FD, vr::FL, vr::SS, vr::US, vr::SL, vr::UL, vr::DS, vr::IS}) CHECK(c.vr_defaults.at(v) == "0");
    CHECK(c.similarity_threshold == 49);
}

TEST_CASE("empty document is rejected in de-identification mode") {
    try {
        (void)load_config("{}");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(e.code() == config_errc::schema_error);
        std::string what = e.what();
        CHECK(what.find("keywords.institution") != std::string::npos);
        CHECK(what.find("keywords.geographic") != std::string::npos);
        CHECK(what.find("keywords.preposition") != std::string::npos);
    }
    auto c = load_config("{}", load_mode::inspect);
    CHECK(c.keywords == default_keyword_lists());
}

TEST_CASE("sensible tags parse from GGGG,EEEE") {
    auto c = load_config(R"({"keywords": {"institution": ["a1"], "geographic": ["b1"], "preposition": ["c1"]},
                             "sensibleTags": ["0010,0010", "0040,a075"]})");
    REQUIRE(c.sensible_tags.size() == 2);
    CHECK(c.sensible_tags[0] == dicom::tag{0x0010, 0x0010});
    CHECK(c.sensible_tags[1].to_string() == "0040,A075");

    CHECK_THROWS_MATCHES(load_config(R"({"keywords": {"institution": ["a1"], "geographic": ["b1"], "preposition": ["c1"]},
                                         "sensibleTags": ["0010;0010"]})"),
                         config_error, Catch::Matchers::Predicate<config_error>([](const config_error& e) {
                             return e.code() == config_errc::invalid_tag;
                         }));
}

TEST_CASE("default keyword lists") {
    auto k = default_keyword_lists();
    CHECK(has(k.institution, "hospital"));
    CHECK(has(k.institution, "memorial"));
    CHECK(has(k.institution, "university"));
    CHECK(has(k.institution, "uiversity"));
    CHECK(has(k.institution, "follow up"));
    CHECK(has(k.geographic, "straße"));
    CHECK(has(k.geographic, "via"));
    CHECK(has(k.preposition, "dr"));
    CHECK(has(k.preposition, "prof"));
    CHECK(k.institution.size() == 10);
    CHECK(k.geographic.size() == 8);
    CHECK(k.preposition.size() == 8);
}

TEST_CASE("default sensible tags and custom actions") {
    auto tags = default_sensible_tags();
    CHECK(tags.size() == 11);
    CHECK(std::find(tags.begin(), tags.end(), dicom::tags::patient_name) != tags.end());
    auto c = load_config(minimal);
    CHECK(c.sensible_tags == tags);
    CHECK(c.custom_actions.at(tag_pattern::parse("0010,1010")).kind == action_kind::keep);
    CHECK(c.custom_actions.at(tag_pattern::parse("vr:DA")).kind == action_kind::shift_date);
    CHECK(c.custom_actions.at(tag_pattern::parse("vr:TM")).kind == action_kind::shift_time);
    CHECK(c.custom_actions.at(tag_pattern::parse("vr:UI")).kind == action_kind::remap_uid);
}

TEST_CASE("tag patterns") {
    auto exact = tag_pattern::parse("(0010,0010)");
    auto group = tag_pattern::parse("0008,xxxx");
    auto by_vr = tag_pattern::parse("vr:DA");
    auto priv = tag_pattern::parse("private");
    CHECK(exact.to_string() == "0010,0010");
    CHECK(group.to_string() == "0008,xxxx");
    CHECK(by_vr.to_string() == "vr:DA");
    CHECK(priv.to_string() == "private");
    CHECK(exact.specificity() > group.specificity());
    CHECK(group.specificity() > by_vr.specificity());
    CHECK(by_vr.specificity() > priv.specificity());
    CHECK(group.matches({0x0008, 0x1030}, vr::LO));
    CHECK_FALSE(group.matches({0x0009, 0x1030}, vr::LO));
    CHECK(priv.matches({0x0009, 0x1030}, vr::LO));
    CHECK(by_vr.matches({0x0040, 0x0244}, vr::DA));
    CHECK_THROWS(tag_pattern::parse("vr:ZZ"));
    CHECK_THROWS(tag_pattern::parse("00g8,0010"));
}

TEST_CASE("actions are validated against the VR") {
    auto with_actions = [](const std::string& actions) {
        return R"({"keywords": {"institution": ["a1"], "geographic": ["b1"], "preposition": ["c1"]}, "actions": )" +
               actions + "}";
    };
    auto c = load_config(with_actions(R"({"0010,0010": {"ReplaceWith": "SUBJECT"}, "private": "Remove"})"));
    CHECK(c.custom_actions.at(tag_pattern::parse("0010,0010")) == action_spec{action_kind::replace_with, "SUBJECT"});
    CHECK(c.custom_actions.at(tag_pattern::parse("private")).kind == action_kind::remove);
    // defaults survive alongside explicit entries
    CHECK(c.custom_actions.at(tag_pattern::parse("0010,1010")).kind == action_kind::keep);

    auto code_of = [&](const std::string& actions) {
        try {
            (void)load_config(with_actions(actions));
        } catch (const config_error& e) {
            return std::optional<config_errc>(e.code());
        }
        return std::optional<config_errc>();
    };
    CHECK(code_of(R"({"0010,0010": "ShiftDate"})") == config_errc::invalid_action);
    CHECK(code_of(R"({"vr:PN": "RemapUID"})") == config_errc::invalid_action);
    CHECK(code_of(R"({"0020,000D": "ShiftTime"})") == config_errc::invalid_action);
    CHECK(code_of(R"({"0010,0010": "Scramble"})") == config_errc::invalid_action);
    CHECK(code_of(R"({"0010,00": "Keep"})") == config_errc::invalid_tag);
    CHECK_FALSE(code_of(R"({"0008,0020": "ShiftDate", "0008,0030": "ShiftTime", "vr:DT": "ShiftTime"})"));
    // group patterns have no single VR and are checked when applied
    CHECK_FALSE(code_of(R"({"0008,xxxx": "ShiftDate"})"));

    CHECK(action_legal_for(action_kind::shift_date, vr::DT));
    CHECK_FALSE(action_legal_for(action_kind::shift_date, vr::TM));
    CHECK(action_legal_for(action_kind::replace_default, vr::US));
}

TEST_CASE("unknown keys and type errors") {
    const std::string doc = R"({"keywords": {"institution": ["a1"], "geographic": ["b1"], "preposition": ["c1"]},
                                "extra": 1})";
    auto lenient = load_config(doc);
    CHECK(lenient.warnings.size() == 1);
    CHECK_THROWS_AS(load_config(doc, load_mode::deidentify, dicom::strictness::strict), config_error);
    CHECK_THROWS_AS(load_config(R"({"keywords": {"institution": ["a1"], "geographic": ["b1"], "preposition": ["c1"]},
                                    "strictness": "strict", "extra": 1})"),
                    config_error);

    const std::string bad_types[] = {
        R"({"keywords": {"institution": "hospital", "geographic": ["b1"], "preposition": ["c1"]}})",
        R"({"keywords": {"institution": ["a1"], "geographic": ["b1"], "preposition": ["c1"]}, "similarityThreshold": 101})",
        R"({"keywords": {"institution": ["a1"], "geographic": ["b1"], "preposition": ["c1"]}, "similarityThreshold": "49"})",
        R"({"keywords": {"institution": ["a1"], "geographic": ["b1"], "preposition": ["c1"]}, "uidRoot": "1.02.3"})",
        R"({"keywords": {"institution": ["a1"], "geographic": ["b1"], "preposition": ["c1"]}, "vrDefaults": {"QQ": "x"}})",
        R"({"keywords": {"institution": ["a1"], "geographic": ["b1"], "preposition": ["c1"]}, "ocr": {"engine": "sidecar"}})",
        R"([1, 2])",
        R"({"keywords": )",
    };
    for (const auto& d : bad_types) {
        INFO(d);
        try {
            (void)load_config(d);
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(e.code() == config_errc::schema_error);
        }
    }
}

TEST_CASE("keywords are normalized") {
    auto c = load_config(R"({"keywords": {"institution": ["  Follow   UP ", "HOSPITAL", "hospital"],
                                          "geographic": ["STRASSE", "Straße"], "preposition": ["Dr"]}})");
    CHECK(c.keywords.institution == std::vector<std::string>{"follow up", "hospital"});
    CHECK(c.keywords.geographic == std::vector<std::string>{"strasse", "straße"});
    CHECK(c.keywords.preposition == std::vector<std::string>{"dr"});
}

TEST_CASE("serialize round trip") {
    auto base = load_config(minimal);
    CHECK(load_config(serialize(base)) == base);

    std::mt19937 rng(7);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int round = 0; round < 50; ++round) {
        config::config c = base;
        c.keywords.institution.push_back("kw" + std::to_string(pick(0, 999)));
        c.sensible_tags.push_back({static_cast<std::uint16_t>(pick(0, 0xFFFF)), static_cast<std::uint16_t>(pick(0, 0xFFFF))});
        c.vr_defaults[vr::AE] = "X" + std::to_string(pick(0, 9));
        c.date_shift_days = pick(-5000, 5000);
        c.time_shift_seconds = pick(-90000, 90000);
        c.uid_root = "1.2." + std::to_string(pick(1, 99999));
        c.similarity_threshold = pick(0, 100);
        c.ocr.engine = static_cast<ocr_engine_kind>(pick(0, 2));
        c.ocr.command = {"python3", "serve.py"};
        c.ocr.margin = pick(0, 9);
        c.ocr.modalities = {"*"};
        c.ocr.first_frame_only = pick(0, 1) == 1;
        detection d;
        d.text = "T" + std::to_string(pick(0, 99));
        d.box = {point{1.5, 2}, point{30, 2}, point{30, 9.25}, point{1.5, 9.25}};
        if (pick(0, 1) == 1) d.confidence = 0.875;
        c.ocr.mock_detections = {d};
        c.strictness = pick(0, 1) == 1 ? dicom::strictness::strict : dicom::strictness::lenient;
        c.cap_age_90 = pick(0, 1) == 1;
        if (pick(0, 1) == 1) c.per_patient_shift_salt = "salt" + std::to_string(pick(0, 9));
        c.per_patient_shift_max_days = pick(1, 1000);
        tag_pattern p = tag_pattern::parse("0019,xxxx");
        c.custom_actions[p] = action_spec{action_kind::replace_with, "V" + std::to_string(pick(0, 9))};
        auto text = serialize(c);
        auto back = load_config(text);
        CHECK(back == c);
        CHECK(serialize(back) == text);
    }
    for (auto t : default_sensible_tags()) CHECK(dicom::tag::parse(t.to_string()) == t);
}
