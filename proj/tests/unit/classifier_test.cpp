#include "deid/classifier.hpp"
#include "deid/dicom/file.hpp"
#include "deid/fuzzy.hpp"
#include "deid/text.hpp"

#include "../support/oracles.hpp"
#include "synth.hpp"

#include <catch_amalgamated.hpp>

#include <random>
#include <set>

using namespace deid;
using namespace deid::classifier;
using dicom::tag;
using dicom::vr;

namespace {

config::config test_config() {
    config::config c;
    c.keywords = config::default_keyword_lists();
    c.sensible_tags = config::default_sensible_tags();
    c.vr_defaults = config::default_vr_defaults();
    c.custom_actions = config::default_custom_actions();
    return c;
}

std::set<std::string> values_of(const patient_store& s) { return {s.values().begin(), s.values().end()}; }

dicom::data_element element(tag t, vr v, std::string_view value) {
    dicom::data_element el;
    el.tag = t;
    el.vr = v;
    el.set_string(value);
    return el;
}

struct fixture {
    config::config cfg = test_config();
    keyword_matcher keywords{cfg.keywords};
    patient_store store;

    classification classify(const dicom::data_element& el) {
        return classify_element(el, {{}, el.tag}, context{cfg, keywords, store});
    }
    category category_of(tag t, vr v, std::string_view value) { return classify(element(t, v, value)).kind; }
};

}  // namespace

TEST_CASE("harvest normalizes and splits person names") {
    dicom::dataset ds;
    ds.set_string(dicom::tags::patient_name, vr::PN, "DOE^JOHN");
    patient_store s;
    const auto tags = config::default_sensible_tags();
    harvest_sensible_values(ds, tags, s);
    CHECK(values_of(s) == std::set<std::string>{"doe^john", "doe", "john", "doe john"});
    CHECK(s.sources("doe") == std::set<tag>{dicom::tags::patient_name});
}

TEST_CASE("harvest ignores absent tags, blanks and placeholders") {
    dicom::dataset ds;
    ds.set_string({0x0008, 0x1030}, vr::LO, "CHEST");
    ds.set_string(dicom::tags::operators_name, vr::PN, "   ");
    ds.set_string(dicom::tags::performing_physician_name, vr::PN, "Anonymized");
    patient_store s;
    const auto tags = config::default_sensible_tags();
    const std::vector<std::string> placeholders{"anonymized"};
    harvest_sensible_values(ds, tags, s, placeholders);
    CHECK(s.empty());
}

TEST_CASE("harvest physician with title and patient id") {
    dicom::dataset ds;
    ds.set_string(dicom::tags::referring_physician_name, vr::PN, "Dr. Rossi");
    ds.set_string(dicom::tags::patient_id, vr::LO, "PAT001");
    patient_store s;
    const auto tags = config::default_sensible_tags();
    harvest_sensible_values(ds, tags, s);
    const auto v = values_of(s);
    CHECK(v.contains("dr. rossi"));
    CHECK(v.contains("rossi"));
    CHECK(v.contains("pat001"));
    CHECK_FALSE(v.contains("dr."));
}

TEST_CASE("harvest reaches sensible tags inside sequences and multi-values") {
    dicom::dataset item;
    item.set_string(dicom::tags::performing_physician_name, vr::PN, "SMITH^ANNA\\BIANCHI^LUCA");
    dicom::data_element sq;
    sq.tag = {0x0008, 0x1052};
    sq.vr = vr::SQ;
    sq.items.push_back(item);
    dicom::dataset ds;
    ds.set(sq);
    patient_store s;
    const auto tags = config::default_sensible_tags();
    harvest_sensible_values(ds, tags, s);
    const auto v = values_of(s);
    CHECK(v.contains("smith anna"));
    CHECK(v.contains("bianchi luca"));
    CHECK(v.contains("luca"));
}

TEST_CASE("store JSON round trip") {
    sensible_value_store st;
    st.patient("PAT001").add("doe", dicom::tags::patient_name);
    st.patient("PAT001").add("doe", dicom::tags::operators_name);
    st.patient("PAT002").add("0471 100 1000", tag{0x0020, 0x4000});
    auto back = sensible_value_store::from_json(st.to_json());
    CHECK(back == st);
    CHECK(back.value_count() == 2);

    auto loaded = sensible_value_store::from_json(R"({"patients": {"P": [{"value": "  Doe^JOHN ", "tag": "0010,0010"}]}})");
    REQUIRE(loaded.find("P") != nullptr);
    CHECK(loaded.find("P")->contains("doe^john"));
    CHECK_THROWS_AS(sensible_value_store::from_json("[]"), std::invalid_argument);
    CHECK_THROWS_AS(sensible_value_store::from_json(R"({"patients": {"P": [{"tag": "0010,0010"}]}})"),
                    std::invalid_argument);
}

TEST_CASE("classification examples") {
    fixture f;
    auto inst = f.classify(element({0x0008, 0x1040}, vr::LO, "Presented at Memorial Hospital"));
    CHECK(inst.kind == category::institution);
    CHECK(inst.why.keyword == "hospital");

    auto person = f.classify(element({0x0032, 0x4000}, vr::LO, "Rescanned by Dr Smith"));
    CHECK(person.kind == category::person_context);
    CHECK((person.why.keyword == "by" || person.why.keyword == "dr"));

    auto geo = f.classify(element({0x0008, 0x0081}, vr::LT, "Sent to 123 Main Street"));
    CHECK(geo.kind == category::geographic);
    CHECK(geo.why.keyword == "street");

    f.store.add("doe john", dicom::tags::patient_name);
    auto match = f.classify(element({0x0020, 0x4000}, vr::ST, "patient doe john followup"));
    CHECK(match.kind == category::sensible_match);
    CHECK(match.why.matched == "doe john");
    CHECK(match.why.score == oracle::partial_similarity("doe john", "patient doe john followup"));
    CHECK(match.why.score > 49);
}

TEST_CASE("clean elements carry no evidence") {
    fixture f;
    auto c = f.classify(element({0x0008, 0x1030}, vr::LO, "CHEST PA"));
    CHECK(c.kind == category::clean);
    CHECK(c.why.empty());
    CHECK(f.category_of({0x0018, 0x0050}, vr::DS, "2.5") == category::clean);
    CHECK(f.category_of({0x0028, 0x0010}, vr::US, "") == category::clean);
    CHECK(f.category_of({0x0020, 0x0013}, vr::IS, "12345") == category::clean);
}

TEST_CASE("category precedence") {
    fixture f;
    f.store.add("smith", dicom::tags::patient_name);
    // sensible tag beats everything
    CHECK(f.category_of(dicom::tags::referring_physician_name, vr::PN, "Hospital Street by Dr Smith") ==
          category::identity);
    CHECK(f.category_of(dicom::tags::study_date, vr::DA, "20200101") == category::identity);
    CHECK(f.category_of({0x0008, 0x0023}, vr::DA, "20200101") == category::date_time);
    CHECK(f.category_of({0x0008, 0x0030}, vr::TM, "0830") == category::date_time);
    CHECK(f.category_of({0x0020, 0x000D}, vr::UI, "1.2.3.4") == category::uid);
    // sensible match beats keywords
    CHECK(f.category_of({0x0008, 0x1040}, vr::LO, "Smith Hospital") == category::sensible_match);
    CHECK(f.category_of({0x0008, 0x1040}, vr::LO, "Jones Hospital Street") == category::institution);
    CHECK(f.category_of({0x0008, 0x1040}, vr::LO, "Jones Street by Dr Jones") == category::geographic);
    CHECK(f.category_of({0x0009, 0x1010}, vr::LO, "ask for Jones") == category::person_context);
    CHECK(f.category_of({0x0009, 0x1010}, vr::LO, "internal value") == category::private_tag);
    CHECK(f.category_of({0x0009, 0x1010}, vr::LO, "12345") == category::clean);
}

TEST_CASE("person context needs a capitalized word or a phone number") {
    fixture f;
    CHECK(f.category_of({0x0020, 0x4000}, vr::LT, "Please call 0471 100 1000") == category::person_context);
    CHECK(f.category_of({0x0020, 0x4000}, vr::LT, "call +39 (06) 555-1234") == category::person_context);
    CHECK(f.category_of({0x0020, 0x4000}, vr::LT, "Please call 1234") == category::clean);
    CHECK(f.category_of({0x0020, 0x4000}, vr::LT, "sent to archive") == category::clean);
    CHECK(f.category_of({0x0020, 0x4000}, vr::LT, "sent to Archive") == category::person_context);
    CHECK(f.category_of({0x0020, 0x4000}, vr::LT, "Questions for Dr.Weber") == category::person_context);
}

TEST_CASE("multi-word keywords match as consecutive words") {
    fixture f;
    CHECK(f.category_of({0x0040, 0x0254}, vr::LO, "Follow up Kalomi Hospice") == category::institution);
    CHECK(f.classify(element({0x0040, 0x0254}, vr::LO, "follow-up in 3 weeks")).why.keyword == "follow up");
    CHECK(f.category_of({0x0040, 0x0254}, vr::LO, "follow the arrow up") == category::clean);
    CHECK(f.category_of({0x0008, 0x0080}, vr::LO, "MEMORIAL^HOSPITAL") == category::institution);
}

TEST_CASE("keywords keep diacritics") {
    fixture f;
    CHECK(f.category_of({0x0010, 0x1040}, vr::LO, "Hauptstraße 5") == category::clean);
    CHECK(f.category_of({0x0010, 0x1040}, vr::LO, "Haupt Straße 5") == category::geographic);
    CHECK(f.category_of({0x0010, 0x1040}, vr::LO, "HAUPT STRASSE 5") == category::clean);
}

TEST_CASE("standard UIDs and structural elements stay clean") {
    fixture f;
    f.store.add("monochrome", dicom::tags::patient_name);
    CHECK(f.category_of(dicom::tags::sop_class_uid, vr::UI, "1.2.840.10008.5.1.4.1.1.1") == category::clean);
    CHECK(f.category_of({0x0008, 0x1150}, vr::UI, "1.2.840.10008.5.1.4.1.1.1") == category::clean);
    CHECK(f.category_of(dicom::tags::photometric_interpretation, vr::CS, "MONOCHROME2") == category::clean);
    CHECK(f.category_of(dicom::tags::modality, vr::CS, "DX") == category::clean);
}

TEST_CASE("printable private and unknown bytes are searched as text") {
    fixture f;
    dicom::data_element el;
    el.tag = {0x0019, 0x1001};
    el.vr = vr::UN;
    const std::string text = "Sent to Clinic Rosa";
    el.bytes.assign(text.begin(), text.end());
    CHECK(f.classify(el).kind == category::institution);
    el.bytes = {0x01, 0x02, 0x41, 0x00};
    CHECK(f.classify(el).kind == category::clean);
}

TEST_CASE("classify_dataset is total over nested items") {
    fixture f;
    dicom::dataset ds;
    for (std::uint16_t e = 1; e <= 10; ++e) ds.set_string({0x0011, e}, vr::LO, "value");
    auto c = classify_dataset(ds, context{f.cfg, f.keywords, f.store});
    CHECK(c.size() == 10);

    dicom::dataset with_seq;
    dicom::data_element sq;
    sq.tag = {0x0008, 0x1032};
    sq.vr = vr::SQ;
    for (int i = 0; i < 2; ++i) {
        dicom::dataset item;
        item.set_string({0x0008, 0x0100}, vr::SH, "ZZ");
        item.set_string({0x0008, 0x0102}, vr::SH, "99");
        item.set_string({0x0008, 0x0104}, vr::LO, "Chest at Clinic Rosa");
        sq.items.push_back(item);
    }
    with_seq.set(sq);
    auto nested = classify_dataset(with_seq, context{f.cfg, f.keywords, f.store});
    REQUIRE(nested.size() == 7);
    std::set<std::string> paths;
    for (const auto& x : nested) paths.insert(x.path.to_string());
    CHECK(paths.size() == 7);
    CHECK(nested[3].path.to_string() == "(0008,1032)[0].(0008,0104)");
    CHECK(nested[3].kind == category::institution);
}

TEST_CASE("planted PHI in non-standard tags is found") {
    auto dir = synth::scratch_dir("classify");
    synth::corpus_options o;
    o.patients = 1;
    o.studies = 1;
    o.series = 1;
    o.instances = 1;
    o.pixels = false;
    auto corpus = synth::generate_corpus(dir, o);
    const auto& gf = corpus.files.at(0);
    auto file = dicom::read_file(gf.path);

    fixture f;
    harvest_sensible_values(file.data, f.cfg.sensible_tags, f.store);
    auto result = classify_dataset(file.data, context{f.cfg, f.keywords, f.store});
    REQUIRE(result.size() == file.data.recursive_size());
    for (const auto& plant : gf.plants) {
        INFO(plant.tag << " = " << plant.value);
        bool found = false;
        for (const auto& c : result) {
            const auto p = c.path.to_string();
            const bool same = plant.tag.find('[') == std::string::npos
                                  ? p == "(" + plant.tag + ")"
                                  : p == "(0008,1032)[0].(0008,0104)";
            if (same) {
                found = true;
                CHECK(c.kind != category::clean);
            }
        }
        CHECK(found);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("enlarging keyword lists never shrinks the flagged set") {
    const std::vector<std::string> vocabulary{"clinic", "street", "by",    "dr",   "call",  "Rossi", "12345678",
                                              "report", "seen",  "Via",   "at",   "to",    "Weber", "hospital",
                                              "of",     "Allee", "memo",  "prof", "route", "the",   "follow",
                                              "up",     "99",    "Kalo",  "for",  "avenue"};
    std::mt19937 rng(11);
    std::uniform_int_distribution<std::size_t> pick(0, vocabulary.size() - 1);
    config::config cfg = test_config();
    patient_store store;
    for (int round = 0; round < 200; ++round) {
        config::keyword_lists small;
        for (auto* list : {&small.institution, &small.geographic, &small.preposition}) {
            for (int k = 0; k < 2; ++k) list->push_back(text::normalize(vocabulary[pick(rng)]));
        }
        config::keyword_lists large = small;
        for (auto* list : {&large.institution, &large.geographic, &large.preposition}) {
            for (int k = 0; k < 3; ++k) list->push_back(text::normalize(vocabulary[pick(rng)]));
        }
        keyword_matcher ms(small);
        keyword_matcher ml(large);
        for (int t = 0; t < 20; ++t) {
            std::string value;
            const int words = 1 + static_cast<int>(pick(rng) % 6);
            for (int w = 0; w < words; ++w) value += (w ? " " : "") + vocabulary[pick(rng)];
            auto el = element({0x0011, 0x0010}, vr::LT, value);
            auto a = classify_element(el, {{}, el.tag}, context{cfg, ms, store});
            auto b = classify_element(el, {{}, el.tag}, context{cfg, ml, store});
            INFO(value);
            if (a.kind != category::clean) CHECK(b.kind != category::clean);
        }
    }
}

TEST_CASE("deep search examples") {
    auto run = [](const std::vector<std::string>& texts, const std::string& seed) {
        std::vector<dicom::dataset> docs;
        for (const auto& t : texts) {
            dicom::dataset ds;
            ds.set_string({0x0032, 0x4000}, vr::LT, t);
            docs.push_back(ds);
        }
        std::vector<corpus_document> corpus;
        for (const auto& d : docs) corpus.push_back({"P", &d});
        sensible_value_store seeds;
        seeds.patient("P").add(seed, dicom::tags::referring_physician_name);
        return deep_search(corpus, seeds);
    };

    auto one = run({"call Dr Smith"}, "smith");
    REQUIRE(one.size() == 2);
    CHECK(one[0].word == "dr");
    CHECK(one[0].primary == 1);
    CHECK(one[0].secondary == 0);
    CHECK(one[1].word == "call");
    CHECK(one[1].primary == 0);
    CHECK(one[1].secondary == 1);
    CHECK(one[0].pool == keyword_pool::preposition);
    CHECK(one[0].contexts == std::vector<std::string>{"call dr <seed>"});

    CHECK(run({"nothing to see here"}, "smith").empty());

    auto three = run({"von Prof Weber", "von Prof Weber", "von Prof Weber"}, "weber");
    REQUIRE(three.size() == 2);
    CHECK(three[0].word == "prof");
    CHECK(three[0].frequency() == 3);
    CHECK(three[1].word == "von");
    CHECK(three[1].frequency() == 3);

    // overlapping seeds walk back to the first unrelated word
    std::vector<dicom::dataset> docs(1);
    docs[0].set_string({0x0032, 0x4000}, vr::LT, "seen by Doe John today");
    sensible_value_store seeds;
    seeds.patient("P").add("doe", dicom::tags::patient_name);
    seeds.patient("P").add("john", dicom::tags::patient_name);
    seeds.patient("P").add("doe john", dicom::tags::patient_name);
    auto overlap = deep_search({{"P", &docs[0]}}, seeds);
    REQUIRE(overlap.size() == 2);
    CHECK(overlap[0].word == "by");
    CHECK(overlap[0].frequency() == 1);
    CHECK(overlap[1].word == "seen");

    // address seeds feed the geographic pool, other patients' seeds are ignored
    sensible_value_store geo;
    geo.patient("P").add("kalomi", dicom::tags::patient_address);
    geo.patient("Q").add("today", dicom::tags::patient_name);
    dicom::dataset addr;
    addr.set_string({0x0008, 0x0081}, vr::ST, "12 Rue Kalomi");
    auto g = deep_search({{"P", &addr}}, geo);
    REQUIRE(g.size() == 1);
    CHECK(g[0].word == "rue");
    CHECK(g[0].pool == keyword_pool::geographic);

    CHECK_THROWS_AS(deep_search({}, sensible_value_store{}), empty_seeds_error);
}

TEST_CASE("deep search candidates close the keyword gap") {
    auto dir = synth::scratch_dir("deep");
    synth::corpus_options o;
    o.patients = 2;
    o.studies = 1;
    o.series = 1;
    o.instances = 2;
    o.pixels = false;
    o.plant_loop_phi = true;
    auto corpus = synth::generate_corpus(dir, o);
    auto seeds = sensible_value_store::from_json(corpus.truth_store_json);

    std::vector<dicom::dicom_file> files;
    for (const auto& gf : corpus.files) files.push_back(dicom::read_file(gf.path));
    std::vector<corpus_document> docs;
    for (std::size_t i = 0; i < files.size(); ++i) docs.push_back({corpus.files[i].patient_id, &files[i].data});

    auto candidates = deep_search(docs, seeds);
    REQUIRE_FALSE(candidates.empty());
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        CHECK(candidates[i - 1].frequency() >= candidates[i].frequency());
    }

    config::config cfg = test_config();
    cfg.keywords = {};
    CHECK(append_candidates(cfg.keywords, candidates) > 0);
    keyword_matcher matcher(cfg.keywords);
    patient_store empty;
    const context ctx{cfg, matcher, empty};

    std::size_t checked = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto* patient = seeds.find(corpus.files[i].patient_id);
        REQUIRE(patient != nullptr);
        dicom::walk(files[i].data, [&](const dicom::element_path& path, const dicom::data_element& el) {
            if (el.vr == vr::DA || el.vr == vr::TM || el.vr == vr::UI || is_structural(el.tag)) return;
            auto value = text_view(el);
            if (!value) return;
            const auto tokens = text::word_parts(text::tokenize(*value));
            for (const auto& seed : patient->values()) {
                const auto seed_parts = text::word_parts(text::tokenize(seed));
                for (std::size_t k = 1; k + seed_parts.size() <= tokens.size(); ++k) {
                    bool hit = true;
                    for (std::size_t j = 0; j < seed_parts.size(); ++j) {
                        hit = hit && tokens[k + j].folded == seed_parts[j].folded;
                    }
                    if (!hit) continue;
                    // occurrence with a preceding word outside the seed itself
                    bool preceded = false;
                    for (std::size_t j = 0; j < k; ++j) {
                        bool inside_seed = false;
                        for (const auto& s2 : patient->values()) {
                            if (text::normalize(text::encode_utf8(tokens[j].folded)) == s2) inside_seed = true;
                        }
                        if (!inside_seed) preceded = true;
                    }
                    if (!preceded) continue;
                    INFO(path.to_string() << " " << *value);
                    CHECK(classify_element(el, path, ctx).kind != category::clean);
                    ++checked;
                }
            }
        });
    }
    CHECK(checked > 0);
    std::filesystem::remove_all(dir);
}
