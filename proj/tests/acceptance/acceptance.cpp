// End-to-end acceptance checks on synthetic corpora. Prints one PASS/FAIL
// line per criterion and exits non-zero when any criterion fails.

#include "deid/audit.hpp"
#include "deid/classifier.hpp"
#include "deid/dicom/file.hpp"
#include "deid/fuzzy.hpp"
#include "deid/pipeline.hpp"
#include "deid/scrub.hpp"

#include "../support/oracles.hpp"
#include "glyph_ocr.hpp"
#include "synth.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

using namespace deid;

namespace {

struct outcome {
    bool pass = false;
    std::string detail;
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t) {
    return std::chrono::duration<double>(clock_type::now() - t).count();
}

config::config base_config() {
    config::config c;
    c.keywords = config::default_keyword_lists();
    c.sensible_tags = config::default_sensible_tags();
    c.vr_defaults = config::default_vr_defaults();
    c.custom_actions = config::default_custom_actions();
    c.date_shift_days = -37;
    c.uid_root = "2.25.4242";
    return c;
}

unsigned workers() { return std::max(4U, std::thread::hardware_concurrency()); }

pipeline::run_report run_pipeline(const config::config& cfg, const std::filesystem::path& in,
                                  const std::filesystem::path& out, bool scrub = true) {
    pipeline::run_options o;
    o.in = in;
    o.out = out;
    o.threads = workers();
    o.scrub = scrub;
    o.hash_salt = "acceptance";
    return pipeline::run(cfg, o);
}

audit::result header_audit(const std::filesystem::path& in, const std::filesystem::path& out,
                           const synth::corpus& corpus) {
    audit::options o;
    o.threads = workers();
    return audit::scan_residual(in, out, sensible_value_store::from_json(corpus.truth_store_json), o);
}

std::string fmt_score(const audit::result& r) {
    std::ostringstream s;
    s << r.score.percent() << " (" << r.score.removed << "/" << r.score.total_targets << ", "
      << r.findings.size() << " findings)";
    return s.str();
}

// ---------------------------------------------------------------------------

outcome round_trip() {
    const auto dir = synth::scratch_dir("acc-roundtrip");
    synth::corpus_options o;
    o.patients = 5;
    o.studies = 2;
    o.series = 4;
    o.instances = 5;
    const auto corpus = synth::generate_corpus(dir, o);
    std::set<bool> syntaxes;
    std::set<int> kinds;
    const auto start = clock_type::now();
    std::size_t identical = 0;
    for (const auto& gf : corpus.files) {
        const auto bytes = dicom::read_bytes(gf.path);
        if (dicom::write_file(dicom::parse_file(bytes)) == bytes) ++identical;
        syntaxes.insert(gf.explicit_vr);
        kinds.insert(static_cast<int>(gf.image.kind));
    }
    const double t = seconds_since(start);
    std::filesystem::remove_all(dir);
    std::ostringstream s;
    s << identical << "/" << corpus.files.size() << " byte-identical, " << syntaxes.size() << " transfer syntaxes, "
      << kinds.size() << " pixel kinds, " << t << " s";
    return {corpus.files.size() >= 200 && identical == corpus.files.size() && syntaxes.size() == 2 &&
                kinds.size() >= 4 && t < 10.0,
            s.str()};
}

outcome plant_and_seek() {
    const auto dir = synth::scratch_dir("acc-plant");
    synth::corpus_options o;
    o.burned_text = true;
    const auto corpus = synth::generate_corpus(dir / "in", o);
    std::size_t plants = 0;
    for (const auto& gf : corpus.files) plants += gf.plants.size();
    const auto report = run_pipeline(base_config(), dir / "in", dir / "out");
    const auto header = header_audit(dir / "in", dir / "out", corpus);

    // pixels too, with an independent re-scan of every frame
    std::vector<std::string> vocabulary{"W 120 L 40"};
    for (const auto& gf : corpus.files) vocabulary.push_back(gf.image.texts[0].text);
    ocr::engine_pool glyphs([&] { return std::make_unique<synth::glyph_ocr>(vocabulary); });
    audit::options po;
    po.pixels = &glyphs;
    po.threads = workers();
    const auto full =
        audit::scan_residual(dir / "in", dir / "out", sensible_value_store::from_json(corpus.truth_store_json), po);
    std::filesystem::remove_all(dir);
    std::ostringstream s;
    s << plants << " plants, exit " << report.exit_status() << ", header score " << fmt_score(header)
      << ", with pixels " << fmt_score(full);
    return {report.exit_status() == 0 && header.score.percent() == 100.0 && header.findings.empty() &&
                full.score.percent() == 100.0 && full.findings.empty() && header.score.total_targets > 0,
            s.str()};
}

outcome keyword_loop() {
    const auto dir = synth::scratch_dir("acc-loop");
    synth::corpus_options o;
    o.pixels = false;
    o.plant_loop_phi = true;
    const auto corpus = synth::generate_corpus(dir / "in", o);
    auto cfg = base_config();
    auto& prep = cfg.keywords.preposition;
    std::erase(prep, "prof");
    std::erase(prep, "dr");

    (void)run_pipeline(cfg, dir / "in", dir / "out1", false);
    const auto before = header_audit(dir / "in", dir / "out1", corpus);

    const auto seeds = sensible_value_store::from_json(corpus.truth_store_json);
    const auto candidates = pipeline::train_keywords(dir / "in", seeds);
    const auto added = classifier::append_candidates(cfg.keywords, candidates);
    (void)run_pipeline(cfg, dir / "in", dir / "out2", false);
    const auto after = header_audit(dir / "in", dir / "out2", corpus);
    std::filesystem::remove_all(dir);

    const bool relearned = std::find(prep.begin(), prep.end(), "prof") != prep.end() &&
                           std::find(prep.begin(), prep.end(), "dr") != prep.end();
    std::ostringstream s;
    s << "before " << fmt_score(before) << ", " << added << " keywords appended"
      << (relearned ? " (prof, dr relearned)" : "") << ", after " << fmt_score(after);
    return {before.score.percent() < 100.0 && after.score.percent() > before.score.percent() &&
                after.score.percent() == 100.0 && after.findings.empty(),
            s.str()};
}

/// Every DA value in a dataset, at any depth.
std::vector<std::string> all_dates(const dicom::dataset& ds) {
    std::vector<std::string> out;
    dicom::walk(ds, [&](const dicom::element_path&, const dicom::data_element& el) {
        if (el.vr != dicom::vr::DA) return;
        for (const auto& v : el.strings()) {
            if (v.size() == 8) out.push_back(v);
        }
    });
    return out;
}

outcome interval_preservation() {
    const auto dir = synth::scratch_dir("acc-interval");
    synth::corpus_options o;
    o.pixels = false;
    o.patients = 3;
    const auto corpus = synth::generate_corpus(dir / "in", o);
    auto cfg = base_config();
    cfg.per_patient_shift_salt = "interval-salt";
    (void)run_pipeline(cfg, dir / "in", dir / "out", false);

    std::map<std::string, std::pair<std::vector<long>, std::vector<long>>> per_patient;
    for (const auto& gf : corpus.files) {
        const auto before = all_dates(dicom::read_file(gf.path).data);
        const auto after = all_dates(dicom::read_file(dir / "out" / gf.relative).data);
        auto& [b, a] = per_patient[gf.patient_id];
        if (before.size() != after.size()) return {false, gf.relative + ": date count changed"};
        for (const auto& d : before) b.push_back(oracle::ordinal(oracle::parse_da(d)));
        for (const auto& d : after) a.push_back(oracle::ordinal(oracle::parse_da(d)));
    }
    std::filesystem::remove_all(dir);
    std::size_t pairs = 0;
    std::set<long> shifts;
    for (const auto& [patient, dates] : per_patient) {
        const auto& [b, a] = dates;
        for (std::size_t i = 0; i < b.size(); ++i) {
            shifts.insert(a[i] - b[i]);
            for (std::size_t j = i + 1; j < b.size(); ++j) {
                ++pairs;
                if (b[j] - b[i] != a[j] - a[i]) return {false, patient + ": interval changed"};
            }
        }
    }
    std::ostringstream s;
    s << pairs << " date pairs over " << per_patient.size() << " patients, " << shifts.size() << " distinct offsets";
    return {pairs > 0 && !shifts.contains(0), s.str()};
}

outcome uid_integrity() {
    const auto dir = synth::scratch_dir("acc-uid");
    synth::corpus_options o;
    o.pixels = false;
    o.patients = 2;
    o.studies = 2;
    const auto corpus = synth::generate_corpus(dir / "in", o);
    (void)run_pipeline(base_config(), dir / "in", dir / "out", false);

    // (input, output) for every UI value at the same position in both files
    std::vector<std::pair<std::string, std::string>> pairs;
    auto collect = [](const dicom::dataset& ds) {
        std::map<std::string, std::string> out;
        dicom::walk(ds, [&](const dicom::element_path& p, const dicom::data_element& el) {
            if (el.vr == dicom::vr::UI) out[p.to_string()] = el.value_string();
        });
        return out;
    };
    for (const auto& gf : corpus.files) {
        const auto in = dicom::read_file(gf.path);
        const auto out = dicom::read_file(dir / "out" / gf.relative);
        for (const auto& [before, after] : {std::pair{&in.meta, &out.meta}, std::pair{&in.data, &out.data}}) {
            const auto a = collect(*before);
            const auto b = collect(*after);
            if (a.size() != b.size()) return {false, gf.relative + ": UID element count changed"};
            for (const auto& [path, value] : a) {
                const auto it = b.find(path);
                if (it == b.end()) return {false, gf.relative + ": " + path + " missing"};
                pairs.emplace_back(value, it->second);
            }
        }
    }
    std::filesystem::remove_all(dir);
    std::size_t checked = 0;
    std::size_t changed = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        changed += pairs[i].first != pairs[i].second;
        for (std::size_t j = i + 1; j < pairs.size(); ++j) {
            ++checked;
            const bool same_in = pairs[i].first == pairs[j].first;
            const bool same_out = pairs[i].second == pairs[j].second;
            if (same_in != same_out) {
                return {false, pairs[i].first + " / " + pairs[j].first + " broke referential integrity"};
            }
        }
    }
    std::ostringstream s;
    s << pairs.size() << " UID occurrences, " << checked << " pairs checked, " << changed << " remapped";
    return {changed > 0, s.str()};
}

outcome fuzzy_oracle() {
    std::mt19937 rng(20241016);
    std::uniform_int_distribution<int> len(0, 32);
    std::uniform_int_distribution<int> ch(0, 8);
    auto gen = [&] {
        std::string s;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) s.push_back("abcdeABC "[ch(rng)]);
        return s;
    };
    int agree = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto a = gen();
        const auto b = gen();
        agree += fuzzy::similarity(a, b) == oracle::similarity(a, b);
    }
    return {agree == 1000, std::to_string(agree) + "/1000 pairs equal to the Levenshtein oracle"};
}

outcome pixel_scrub() {
    const auto dir = synth::scratch_dir("acc-pixels");
    synth::corpus_options o;
    o.burned_text = true;
    o.patients = 5;
    o.studies = 1;
    o.series = 2;
    o.instances = 2;
    const auto corpus = synth::generate_corpus(dir, o);
    const auto cfg = base_config();
    ocr::fixture_engine engine;
    synth::glyph_ocr annotation({"W 120 L 40"});
    std::size_t redacted = 0;
    for (const auto& gf : corpus.files) {
        auto file = dicom::read_file(gf.path);
        patient_store store;
        harvest_sensible_values(file.data, cfg.sensible_tags, store);
        const auto before = dicom::decode_pixel_data(file.data);
        const auto black = scrub::black_stored_value(before, 0, scrub::read_rescale(file.data));
        const auto r = scrub::scrub_pixels(file.data, store.values(), engine, {gf.path, 0}, {});
        const auto after = dicom::decode_pixel_data(file.data);
        if (r.redactions.empty()) return {false, gf.relative + ": name not redacted"};
        for (const auto& red : r.redactions) {
            if (red.found.text != gf.image.texts[0].text) return {false, gf.relative + ": redacted a non-PHI annotation"};
        }
        for (std::uint32_t y = 0; y < after.layout.rows; ++y) {
            for (std::uint32_t x = 0; x < after.layout.cols; ++x) {
                const bool inside = std::any_of(r.redactions.begin(), r.redactions.end(), [&](const auto& red) {
                    return red.region.contains(static_cast<int>(x), static_cast<int>(y));
                });
                if (inside && after.at(0, y, x) != black) return {false, gf.relative + ": box not uniformly black"};
                if (!inside && after.at(0, y, x) != before.at(0, y, x)) {
                    return {false, gf.relative + ": pixel outside the box changed"};
                }
            }
        }
        const auto img = scrub::to_8bit(after, 0, scrub::read_rescale(file.data), scrub::read_window(file.data));
        if (annotation.detect(img, {}).size() != 1) return {false, gf.relative + ": annotation lost"};
        redacted += r.redactions.size();
    }
    std::filesystem::remove_all(dir);
    return {corpus.files.size() == 20,
            std::to_string(corpus.files.size()) + " images, " + std::to_string(redacted) +
                " boxes filled, annotations intact"};
}

outcome windowing() {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> center(-3000, 5000);
    std::uniform_real_distribution<double> width(1, 6000);
    std::uniform_int_distribution<std::int32_t> stored(-32768, 32767);
    std::uniform_int_distribution<std::int32_t> byte(0, 255);
    auto matrix = [](std::vector<std::int32_t> v, std::uint32_t bits, bool is_signed) {
        dicom::pixel_matrix m;
        m.layout.rows = 1;
        m.layout.cols = static_cast<std::uint32_t>(v.size());
        m.layout.bits_allocated = bits <= 8 ? 8 : 16;
        m.layout.bits_stored = bits;
        m.layout.high_bit = bits - 1;
        m.layout.is_signed = is_signed;
        m.values = std::move(v);
        return m;
    };
    for (int i = 0; i < 10000; ++i) {
        if (i % 2 == 0) {
            const scrub::window w{center(rng), width(rng)};
            std::vector<std::int32_t> v{stored(rng), stored(rng), stored(rng)};
            std::sort(v.begin(), v.end());
            const auto img = scrub::to_8bit(matrix(v, 16, true), 0, {}, w);
            if (!(img.bytes[0] <= img.bytes[1] && img.bytes[1] <= img.bytes[2])) return {false, "not monotone"};
            for (std::size_t k = 0; k < v.size(); ++k) {
                if (v[k] <= w.center - w.width / 2 && img.bytes[k] != 0) return {false, "no clamp at 0"};
                if (v[k] > w.center + w.width / 2 && img.bytes[k] != 255) return {false, "no clamp at 255"};
            }
        } else {
            const std::vector<std::int32_t> v{byte(rng), byte(rng), byte(rng)};
            const auto img = scrub::to_8bit(matrix(v, 8, false), 0, {}, scrub::window{128, 256});
            for (std::size_t k = 0; k < v.size(); ++k) {
                if (std::abs(int(img.bytes[k]) - v[k]) > 1) return {false, "identity window off by more than 1"};
            }
        }
    }
    return {true, "10000 cases: monotone, clamped, identity within 1"};
}

outcome throughput() {
    const auto dir = synth::scratch_dir("acc-throughput");
    synth::corpus_options o;
    o.patients = 10;
    o.studies = 5;
    o.series = 4;
    o.instances = 5;
    const auto corpus = synth::generate_corpus(dir / "in", o);
    auto cfg = base_config();
    cfg.ocr.engine = config::ocr_engine_kind::mock;
    detection d;
    d.text = "JOHN DOE";
    d.box = {point{1, 1}, point{8, 1}, point{8, 5}, point{1, 5}};
    cfg.ocr.mock_detections = {d};
    cfg.ocr.modalities = {"*"};
    const auto start = clock_type::now();
    const auto report = run_pipeline(cfg, dir / "in", dir / "out");
    const double t = seconds_since(start);
    std::filesystem::remove_all(dir);
    std::ostringstream s;
    s << report.files_out() << "/" << corpus.files.size() << " files in " << t << " s ("
      << static_cast<int>(static_cast<double>(report.files_out()) / t) << " files/s, " << workers() << " threads, "
      << report.redactions() << " redactions)";
    return {corpus.files.size() == 1000 && report.files_out() == 1000 && report.exit_status() == 0 && t < 120.0,
            s.str()};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<outcome()>>> criteria{
        {"round-trip", round_trip},
        {"plant-and-seek", plant_and_seek},
        {"keyword-loop", keyword_loop},
        {"interval-preservation", interval_preservation},
        {"uid-integrity", uid_integrity},
        {"fuzzy-oracle", fuzzy_oracle},
        {"pixel-scrub", pixel_scrub},
        {"windowing", windowing},
        {"throughput", throughput},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        outcome r;
        try {
            r = check();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (r.pass ? "PASS " : "FAIL ") << name << ": " << r.detail << std::endl;
        failed += !r.pass;
    }
    return failed == 0 ? 0 : 1;
}
