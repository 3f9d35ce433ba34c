/**
 * @file dicom_deid.cpp
 * @brief Command-line front end: sort, train-keywords, classify, deid, scrub, audit, pipeline.
 */

#include "deid/audit.hpp"
#include "deid/classifier.hpp"
#include "deid/collection.hpp"
#include "deid/config.hpp"
#include "deid/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

using namespace deid;

namespace {

struct shared_flags {
    std::string config;
    std::string in;
    std::string out;
    std::string report;
    unsigned threads = 0;
    bool strict = false;
    bool dry_run = false;
    bool quiet = false;
};

std::mutex log_mutex;
bool quiet = false;

void log_line(const std::string& s) {
    if (quiet) return;
    std::lock_guard lock(log_mutex);
    std::cerr << "dicom-deid: " << s << '\n';
}

unsigned thread_count(unsigned requested) {
    if (requested > 0) return requested;
    return std::max(1U, std::thread::hardware_concurrency());
}

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

std::string hash_salt() { return env("DEID_HASH_SALT").value_or(pipeline::random_salt()); }

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text << '\n';
        return;
    }
    const auto bytes = text + "\n";
    pipeline::write_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

config::config load(const shared_flags& f, config::load_mode mode) {
    const auto strictness =
        f.strict ? std::optional<dicom::strictness>(dicom::strictness::strict) : std::optional<dicom::strictness>();
    if (f.config.empty()) {
        if (mode == config::load_mode::deidentify) throw std::runtime_error("--config is required");
        return config::load_config("{}", mode, strictness);
    }
    auto cfg = config::load_config_file(f.config, mode, strictness);
    for (const auto& w : cfg.warnings) log_line("warning: " + w);
    if (mode == config::load_mode::deidentify) {
        if (cfg.date_shift_days == 0 && !cfg.per_patient_shift_salt) log_line("warning: dateShiftDays is 0, dates are kept");
        if (cfg.uid_root == config::config{}.uid_root) log_line("warning: uidRoot is the built-in placeholder");
    }
    return cfg;
}

void add_shared(CLI::App* app, shared_flags& f) {
    app->add_option("--config", f.config, "configuration JSON");
    app->add_option("--in", f.in, "input directory or file")->required();
    app->add_option("--out", f.out, "output directory (train-keywords: candidates file)");
    app->add_option("--report", f.report, "machine-readable JSON report");
    app->add_option("--threads", f.threads, "worker threads (default: all cores)");
    app->add_flag("--strict", f.strict, "stop at the first error");
    app->add_flag("--dry-run", f.dry_run, "classify and report, write nothing under --out");
    app->add_flag("-q,--quiet", f.quiet, "no progress on stderr");
}

struct run_flags {
    std::string uid_map;
    std::string store_out;
    std::string store;
    std::string dump_hierarchy;
    bool first_frame_only = false;
};

int run_stages(const shared_flags& f, const run_flags& r, bool deid, bool scrub) {
    auto cfg = load(f, deid ? config::load_mode::deidentify : config::load_mode::inspect);
    if (r.first_frame_only) cfg.ocr.first_frame_only = true;
    pipeline::run_options o;
    o.in = f.in;
    o.out = f.out;
    if (!f.report.empty()) o.report = f.report;
    o.threads = thread_count(f.threads);
    o.dry_run = f.dry_run;
    o.deid = deid;
    o.scrub = scrub;
    if (!r.uid_map.empty()) o.uid_map = r.uid_map;
    o.uid_map_key = env("DEID_UID_MAP_KEY");
    if (!r.store_out.empty()) o.store_out = r.store_out;
    if (!r.store.empty()) o.store = sensible_value_store::from_json(read_text(r.store));
    if (!r.dump_hierarchy.empty()) o.hierarchy_dump = r.dump_hierarchy;
    o.hash_salt = hash_salt();
    o.log = log_line;
    const auto report = pipeline::run(cfg, o);
    return report.exit_status();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DICOM de-identification: header actions, burned-in text redaction, audit"};
    app.set_version_flag("--version", std::string(pipeline::tool_version));
    app.require_subcommand(1);

    // sort
    shared_flags sort_f;
    std::string dump;
    auto* sort = app.add_subcommand("sort", "group files by patient, study and series");
    add_shared(sort, sort_f);
    sort->add_option("--dump-hierarchy", dump, "write the hierarchy JSON here (default: stdout)");

    // train-keywords
    shared_flags train_f;
    std::string seeds, write_config, format = "json";
    std::size_t min_frequency = 1;
    bool include_secondary = false;
    auto* train = app.add_subcommand("train-keywords", "mine context words that precede known sensitive values");
    add_shared(train, train_f);
    train->add_option("--seeds", seeds, "sensitive value store JSON (default: harvested from --in)");
    train->add_option("--format", format, "json or tsv")->check(CLI::IsMember({"json", "tsv"}));
    train->add_option("--write-config", write_config, "write --config with the candidates appended");
    train->add_option("--min-frequency", min_frequency, "ignore rarer candidates when appending");
    train->add_flag("--include-secondary", include_secondary, "also append words seen one word further back");

    // classify
    shared_flags classify_f;
    bool include_clean = false;
    auto* classify = app.add_subcommand("classify", "report the category and action of every element");
    add_shared(classify, classify_f);
    classify->add_flag("--include-clean", include_clean, "list clean elements too");

    // deid, scrub, pipeline
    shared_flags deid_f, scrub_f, pipe_f;
    run_flags deid_r, scrub_r, pipe_r;
    auto* deid = app.add_subcommand("deid", "de-identify headers");
    auto* scrub = app.add_subcommand("scrub", "redact burned-in text");
    auto* pipe = app.add_subcommand("pipeline", "sort, harvest, classify, de-identify and scrub");
    for (auto [cmd, f, r] : {std::tuple{deid, &deid_f, &deid_r}, std::tuple{scrub, &scrub_f, &scrub_r},
                             std::tuple{pipe, &pipe_f, &pipe_r}}) {
        add_shared(cmd, *f);
        cmd->add_option("--dump-hierarchy", r->dump_hierarchy, "write the hierarchy JSON here");
        if (cmd != scrub) {
            cmd->add_option("--uid-map", r->uid_map, "UID map to load and update (key: $DEID_UID_MAP_KEY)");
            cmd->add_option("--store-out", r->store_out, "write the harvested value store here");
        } else {
            cmd->add_option("--store", r->store, "value store to match against (default: harvested from --in)");
        }
        if (cmd != deid) cmd->add_flag("--scrub-first-frame-only", r->first_frame_only, "scan only frame 0");
    }

    // audit
    shared_flags audit_f;
    std::string original, deidentified, store_path;
    bool audit_pixels = false;
    auto* audit_cmd = app.add_subcommand("audit", "look for sensitive values that survived");
    audit_cmd->add_option("--config", audit_f.config, "configuration JSON (threshold, OCR engine)");
    audit_cmd->add_option("--original", original, "original directory")->required();
    audit_cmd->add_option("--deid", deidentified, "de-identified directory")->required();
    audit_cmd->add_option("--store", store_path, "value store JSON")->required();
    audit_cmd->add_option("--report", audit_f.report, "audit report JSON (default: stdout)");
    audit_cmd->add_option("--threads", audit_f.threads, "worker threads (default: all cores)");
    audit_cmd->add_flag("--strict", audit_f.strict, "fail when a counterpart is missing");
    audit_cmd->add_flag("--audit-pixels", audit_pixels, "re-run OCR on original and de-identified frames");
    audit_cmd->add_flag("-q,--quiet", audit_f.quiet, "no progress on stderr");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sort->parsed()) {
            quiet = sort_f.quiet;
            const auto result = collection::sort_collection(collection::scan_directory(sort_f.in),
                                                            thread_count(sort_f.threads));
            for (const auto& s : result.skipped) log_line("skipped: " + s.path.string() + ": " + s.reason);
            const std::filesystem::path root =
                std::filesystem::is_regular_file(sort_f.in) ? std::filesystem::path(sort_f.in).parent_path()
                                                            : std::filesystem::path(sort_f.in);
            auto doc = result.hierarchy.to_json(root);
            nlohmann::json skipped = nlohmann::json::array();
            for (const auto& s : result.skipped) {
                skipped.push_back({{"path", s.path.lexically_relative(root).generic_string()}, {"reason", s.reason}});
            }
            doc["skipped"] = skipped;
            emit(dump, doc.dump(2));
            return result.skipped.empty() ? pipeline::exit_code::ok : pipeline::exit_code::completed_with_skips;
        }
        if (train->parsed()) {
            quiet = train_f.quiet;
            auto cfg = load(train_f, config::load_mode::inspect);
            const auto seed_store = seeds.empty() ? pipeline::harvest_collection(cfg, train_f.in, thread_count(train_f.threads))
                                                  : sensible_value_store::from_json(read_text(seeds));
            const auto candidates = pipeline::train_keywords(train_f.in, seed_store);
            log_line(std::to_string(candidates.size()) + " candidate keywords");
            std::string text;
            if (format == "tsv") {
                text = "word\tpool\tfrequency\tprimary\tsecondary";
                for (const auto& c : candidates) {
                    text += "\n" + c.word + "\t" + std::string(classifier::to_string(c.pool)) + "\t" +
                            std::to_string(c.frequency()) + "\t" + std::to_string(c.primary) + "\t" +
                            std::to_string(c.secondary);
                }
            } else {
                text = pipeline::candidates_to_json(candidates).dump(2);
            }
            emit(train_f.out.empty() ? train_f.report : train_f.out, text);
            if (!write_config.empty()) {
                const auto added = classifier::append_candidates(cfg.keywords, candidates, min_frequency, include_secondary);
                emit(write_config, config::serialize(cfg));
                log_line("appended " + std::to_string(added) + " keywords to " + write_config);
            }
            return pipeline::exit_code::ok;
        }
        if (classify->parsed()) {
            quiet = classify_f.quiet;
            const auto cfg = load(classify_f, config::load_mode::deidentify);
            const auto doc = pipeline::classify_collection(
                cfg, {classify_f.in, thread_count(classify_f.threads), include_clean, hash_salt()});
            emit(classify_f.report, doc.dump(2));
            return pipeline::exit_code::ok;
        }
        if (deid->parsed()) {
            quiet = deid_f.quiet;
            return run_stages(deid_f, deid_r, true, false);
        }
        if (scrub->parsed()) {
            quiet = scrub_f.quiet;
            return run_stages(scrub_f, scrub_r, false, true);
        }
        if (pipe->parsed()) {
            quiet = pipe_f.quiet;
            return run_stages(pipe_f, pipe_r, true, true);
        }
        if (audit_cmd->parsed()) {
            quiet = audit_f.quiet;
            const auto cfg = load(audit_f, config::load_mode::inspect);
            const auto store = sensible_value_store::from_json(read_text(store_path));
            std::optional<ocr::engine_pool> engines;
            audit::options o;
            o.threshold = cfg.similarity_threshold;
            o.threads = thread_count(audit_f.threads);
            o.hash_salt = hash_salt();
            o.strict = audit_f.strict;
            if (audit_pixels) {
                engines.emplace(ocr::make_factory(cfg.ocr));
                o.pixels = &*engines;
            }
            const auto result = audit::scan_residual(original, deidentified, store, o);
            emit(audit_f.report, result.to_json().dump(2));
            log_line("score " + std::to_string(result.score.percent()) + ", " + std::to_string(result.findings.size()) +
                     " findings, " + std::to_string(result.missing.size()) + " missing");
            const bool clean = result.findings.empty() && result.missing.empty();
            return clean ? pipeline::exit_code::ok : pipeline::exit_code::findings;
        }
    } catch (const config::config_error& e) {
        std::cerr << "dicom-deid: configuration error\n";
        for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
        return pipeline::exit_code::fatal;
    } catch (const std::exception& e) {
        std::cerr << "dicom-deid: " << e.what() << '\n';
        return pipeline::exit_code::fatal;
    }
    return pipeline::exit_code::fatal;
}
