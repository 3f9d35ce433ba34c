#include "deid/pipeline.hpp"

#include "deid/dicom/errors.hpp"
#include "deid/dicom/file.hpp"
#include "deid/text.hpp"

#include <sodium.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include <unistd.h>

namespace deid::pipeline {

namespace {

using config::action_kind;

std::string hex(const unsigned char* p, std::size_t n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        out += digits[p[i] >> 4U];
        out += digits[p[i] & 0xFU];
    }
    return out;
}

void log_to(const run_options& opts, const std::string& line) {
    if (opts.log) opts.log(line);
}

bool inside(const std::filesystem::path& p, const std::filesystem::path& dir) {
    if (dir.empty()) return false;
    const auto a = std::filesystem::weakly_canonical(p);
    const auto b = std::filesystem::weakly_canonical(dir);
    auto [ia, ib] = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
    return ib == b.end();
}

std::filesystem::path input_root(const std::filesystem::path& in) {
    return std::filesystem::is_regular_file(in) ? in.parent_path() : in;
}

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& root) {
    return p.lexically_relative(root).generic_string();
}

/// Run `fn(i)` for i in [0, n) on up to `threads` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
    };
    const unsigned count = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < count; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
}

std::vector<std::string> placeholders(const config::config& cfg) {
    std::vector<std::string> out;
    for (const auto& [_, v] : cfg.vr_defaults) out.push_back(text::normalize(v));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    write_atomic(p, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

/// Every value of every patient, for files whose patient is not in a given store.
patient_store union_of(const sensible_value_store& store) {
    patient_store all;
    for (const auto& [_, p] : store.patients()) all.merge(p);
    return all;
}

struct header_pass {
    std::string patient;
    std::filesystem::path path;
    patient_store harvested;
    std::vector<std::string> uids;
    std::optional<std::string> error;
};

}  // namespace

// ---------------------------------------------------------------------------

std::size_t run_report::files_out() const {
    return static_cast<std::size_t>(std::count_if(files.begin(), files.end(), [](const file_entry& f) {
        return f.status == "written" || f.status == "dry-run";
    }));
}

std::size_t run_report::skipped() const {
    return static_cast<std::size_t>(
        std::count_if(files.begin(), files.end(), [](const file_entry& f) { return f.status == "skipped"; }));
}

std::size_t run_report::flagged() const {
    return static_cast<std::size_t>(
        std::count_if(files.begin(), files.end(), [](const file_entry& f) { return !f.flags.empty(); }));
}

std::size_t run_report::redactions() const {
    std::size_t n = 0;
    for (const auto& f : files) n += f.redactions.size();
    return n;
}

std::map<action_kind, std::size_t> run_report::action_totals() const {
    std::map<action_kind, std::size_t> out;
    for (const auto& f : files) {
        for (const auto& [k, n] : f.action_counts) out[k] += n;
    }
    return out;
}

int run_report::exit_status() const {
    if (aborted) return exit_code::fatal;
    if (skipped() > 0 || flagged() > 0) return exit_code::completed_with_skips;
    return exit_code::ok;
}

nlohmann::json run_report::to_json(const std::string& hash_salt) const {
    nlohmann::json actions = nlohmann::json::object();
    for (const auto& [k, n] : action_totals()) actions[std::string(config::to_string(k))] = n;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& f : files) {
        nlohmann::json e{{"file", f.file}, {"status", f.status}};
        if (!f.patient_hash.empty()) e["patientHash"] = f.patient_hash;
        if (!f.error.empty()) e["error"] = f.error;
        if (!f.flags.empty()) e["flags"] = f.flags;
        nlohmann::json counts = nlohmann::json::object();
        for (const auto& [k, n] : f.action_counts) counts[std::string(config::to_string(k))] = n;
        e["actionCounts"] = counts;
        nlohmann::json records = nlohmann::json::array();
        for (const auto& r : f.actions) {
            nlohmann::json j{{"path", r.path},
                             {"category", std::string(classifier::to_string(r.kind))},
                             {"action", std::string(config::to_string(r.action))},
                             {"oldHash", r.old_hash}};
            if (r.action != action_kind::remove && r.action != action_kind::zero_length) j["newValue"] = r.new_value;
            if (!r.note.empty()) j["note"] = r.note;
            records.push_back(std::move(j));
        }
        e["actions"] = records;
        nlohmann::json reds = nlohmann::json::array();
        for (const auto& r : f.redactions) {
            reds.push_back({{"frame", r.frame},
                            {"box", {r.region.x0, r.region.y0, r.region.x1, r.region.y1}},
                            {"textHash", engine::redacted_hash(r.found.text, hash_salt)},
                            {"matchedHash", engine::redacted_hash(r.matched, hash_salt)},
                            {"score", r.score}});
        }
        e["redactions"] = reds;
        entries.push_back(std::move(e));
    }
    nlohmann::json dups = nlohmann::json::array();
    for (const auto& d : duplicates) {
        nlohmann::json paths = nlohmann::json::array();
        for (const auto& p : d.paths) paths.push_back(p.generic_string());
        dups.push_back({{"sopInstanceUidHash", engine::redacted_hash(d.sop_uid, hash_salt)}, {"paths", paths}});
    }
    return {{"tool", tool_version},
            {"method", engine::method_name},
            {"configDigest", config_digest},
            {"stages", stages},
            {"dryRun", dry_run},
            {"aborted", aborted},
            {"durationSeconds", duration_seconds},
            {"counts",
             {{"filesIn", files_in},
              {"filesOut", files_out()},
              {"skipped", skipped()},
              {"flagged", flagged()},
              {"redactions", redactions()},
              {"actions", actions}}},
            {"duplicates", dups},
            {"warnings", warnings},
            {"files", entries}};
}

// ---------------------------------------------------------------------------

std::string config_digest(const config::config& cfg) {
    if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialize");
    const auto text = config::serialize(cfg);
    std::array<unsigned char, 16> d{};
    crypto_generichash(d.data(), d.size(), reinterpret_cast<const unsigned char*>(text.data()), text.size(), nullptr, 0);
    return hex(d.data(), d.size());
}

std::string random_salt() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialize");
    std::array<unsigned char, 16> b{};
    randombytes_buf(b.data(), b.size());
    return hex(b.data(), b.size());
}

void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw std::runtime_error("cannot write " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------

run_report run(const config::config& cfg, const run_options& opts) {
    const auto started = std::chrono::steady_clock::now();
    if (!std::filesystem::exists(opts.in)) throw std::runtime_error("input does not exist: " + opts.in.string());
    if (!opts.dry_run && (opts.deid || opts.scrub) && opts.out.empty()) throw std::runtime_error("--out is required");
    if (!opts.dry_run && !opts.out.empty() && std::filesystem::weakly_canonical(opts.out) ==
                                                  std::filesystem::weakly_canonical(input_root(opts.in))) {
        throw std::runtime_error("output directory must differ from the input");
    }
    const bool strict = cfg.strictness == dicom::strictness::strict;
    const auto root = input_root(opts.in);

    run_report report;
    report.config_digest = config_digest(cfg);
    report.dry_run = opts.dry_run;
    report.warnings = cfg.warnings;
    report.stages.push_back("sort");
    if (opts.deid) report.stages.insert(report.stages.end(), {"harvest", "classify", "deid"});
    if (opts.scrub) report.stages.push_back("scrub");

    const auto paths = collection::scan_directory(opts.in);
    report.files_in = paths.size();
    const auto sorted = collection::sort_collection(paths, opts.threads);
    report.duplicates = sorted.hierarchy.duplicates();
    for (const auto& d : report.duplicates) {
        log_to(opts, "warning: duplicate SOP Instance UID in " + std::to_string(d.paths.size()) + " files");
    }
    if (opts.hierarchy_dump && !(opts.dry_run && inside(*opts.hierarchy_dump, opts.out))) {
        write_text(*opts.hierarchy_dump, sorted.hierarchy.to_json(root).dump(2));
    }
    log_to(opts, "sorted " + std::to_string(paths.size()) + " files, " + std::to_string(sorted.skipped.size()) +
                     " unreadable");

    std::optional<engine::uid_map> loaded;
    if (opts.uid_map && std::filesystem::exists(*opts.uid_map)) {
        loaded.emplace(engine::uid_map::load(*opts.uid_map, opts.uid_map_key));
        if (loaded->root() != cfg.uid_root) {
            report.warnings.push_back("UID map root " + loaded->root() + " differs from uidRoot " + cfg.uid_root);
        }
    }
    engine::uid_map uids = loaded ? *loaded : engine::uid_map(cfg.uid_root);

    // phase 1: headers, in hierarchy order
    std::vector<header_pass> work;
    for (const auto& [key, files] : sorted.hierarchy.files_by_patient()) {
        for (const auto& p : files) work.push_back({key, p, {}, {}, std::nullopt});
    }
    const auto holders = placeholders(cfg);
    classifier::keyword_matcher keywords(cfg.keywords);
    const patient_store no_values;
    parallel_for(work.size(), opts.threads, [&](std::size_t i) {
        auto& w = work[i];
        try {
            dicom::parse_options po;
            po.stop_before_pixel_data = true;
            const auto file = dicom::read_file(w.path, po);
            if (!opts.store) harvest_sensible_values(file.data, cfg.sensible_tags, w.harvested, holders);
            if (opts.deid) {
                // UID classification does not depend on harvested values
                const auto cls = classifier::classify_dataset(file.data, {cfg, keywords, no_values});
                w.uids = engine::uids_to_remap(file.data, cls, cfg);
            }
        } catch (const std::exception& e) {
            w.error = e.what();
        }
    });
    sensible_value_store store = opts.store ? *opts.store : sensible_value_store{};
    for (const auto& w : work) {
        if (!opts.store) store.patient(w.patient).merge(w.harvested);
        for (const auto& u : w.uids) (void)uids.remap(u);
    }
    const patient_store fallback = opts.store ? union_of(*opts.store) : patient_store{};
    if (opts.store_out && !opts.dry_run) write_text(*opts.store_out, store.to_json());

    // phase 2: files in parallel
    report.files.resize(work.size());
    std::atomic<bool> stop{false};
    std::mutex log_mutex;
    std::optional<ocr::engine_pool> engines;
    if (opts.scrub) engines.emplace(opts.engine ? *opts.engine : ocr::make_factory(cfg.ocr));

    parallel_for(work.size(), opts.threads, [&](std::size_t i) {
        const auto& w = work[i];
        auto& entry = report.files[i];
        entry.file = relative_to(w.path, root);
        entry.patient_hash = engine::redacted_hash(w.patient, opts.hash_salt);
        auto fail = [&](const std::string& why) {
            entry.status = "skipped";
            entry.error = why;
            if (strict) stop = true;
            std::lock_guard lock(log_mutex);
            log_to(opts, "error: " + entry.file + ": " + why);
        };
        if (stop) {
            entry.status = "skipped";
            entry.error = "not processed: run stopped at an earlier error";
            return;
        }
        if (w.error) return fail(*w.error);
        try {
            auto file = dicom::read_file(w.path);
            const auto* found = store.find(w.patient);
            const patient_store& values = found != nullptr ? *found : (opts.store ? fallback : no_values);

            if (opts.deid) {
                const auto cls = classifier::classify_dataset(file.data, {cfg, keywords, values});
                const engine::deid_context ctx{uids, engine::patient_date_shift(cfg, w.patient), cfg.time_shift_seconds};
                auto r = engine::deid_file(file, cls, ctx, cfg, opts.hash_salt);
                entry.actions = std::move(r.records);
                entry.action_counts = std::move(r.counts);
            }
            if (opts.scrub && file.data.contains(dicom::tags::pixel_data) &&
                scrub::modality_allowed(file.data, cfg.ocr.modalities)) {
                try {
                    auto lease = engines->acquire();
                    scrub::options so;
                    so.threshold = cfg.similarity_threshold;
                    so.margin = cfg.ocr.margin;
                    so.first_frame_only = cfg.ocr.first_frame_only;
                    auto r = scrub::scrub_pixels(file.data, values.values(), *lease, {w.path, 0}, so);
                    entry.redactions = std::move(r.redactions);
                } catch (const dicom::dicom_error& e) {
                    if (strict) throw;
                    entry.flags.push_back(std::string("pixel data not scrubbed: ") + e.what());
                } catch (const ocr::engine_unavailable& e) {
                    if (strict) throw;
                    entry.flags.push_back(std::string("OCR unavailable: ") + e.what());
                }
            }
            const auto bytes = dicom::write_file(file, {cfg.strictness});
            if (opts.dry_run) {
                entry.status = "dry-run";
            } else {
                write_atomic(opts.out / entry.file, bytes);
                entry.status = "written";
            }
        } catch (const std::exception& e) {
            fail(e.what());
        }
    });
    report.aborted = stop;

    for (const auto& s : sorted.skipped) {
        file_entry e;
        e.file = relative_to(s.path, root);
        e.status = "skipped";
        e.error = s.reason;
        report.files.push_back(std::move(e));
        log_to(opts, "skipped: " + relative_to(s.path, root) + ": " + s.reason);
    }
    if (strict && !sorted.skipped.empty()) report.aborted = true;

    if (opts.uid_map && !opts.dry_run && opts.deid) uids.save(*opts.uid_map, opts.uid_map_key);
    report.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (opts.report && !(opts.dry_run && inside(*opts.report, opts.out))) {
        write_text(*opts.report, report.to_json(opts.hash_salt).dump(2));
    } else if (opts.report) {
        log_to(opts, "warning: dry run, report not written inside the output directory");
    }
    log_to(opts, "done: " + std::to_string(report.files_out()) + " written, " + std::to_string(report.skipped()) +
                     " skipped, " + std::to_string(report.flagged()) + " flagged, " +
                     std::to_string(report.redactions()) + " redactions");
    return report;
}

// ---------------------------------------------------------------------------

sensible_value_store harvest_collection(const config::config& cfg, const std::filesystem::path& in, unsigned threads) {
    const auto paths = collection::scan_directory(in);
    const auto holders = placeholders(cfg);
    std::vector<std::pair<std::string, patient_store>> parts(paths.size());
    parallel_for(paths.size(), threads, [&](std::size_t i) {
        try {
            dicom::parse_options po;
            po.stop_before_pixel_data = true;
            const auto file = dicom::read_file(paths[i], po);
            parts[i].first = collection::patient_key(file.data);
            harvest_sensible_values(file.data, cfg.sensible_tags, parts[i].second, holders);
        } catch (const std::exception&) {
            // unreadable files contribute nothing
        }
    });
    sensible_value_store store;
    for (const auto& [key, values] : parts) {
        if (!key.empty()) store.patient(key).merge(values);
    }
    return store;
}

nlohmann::json classify_collection(const config::config& cfg, const classify_options& opts) {
    const auto store = harvest_collection(cfg, opts.in, opts.threads);
    const auto paths = collection::scan_directory(opts.in);
    const auto root = input_root(opts.in);
    classifier::keyword_matcher keywords(cfg.keywords);
    const patient_store none;
    std::vector<nlohmann::json> entries(paths.size());
    parallel_for(paths.size(), opts.threads, [&](std::size_t i) {
        nlohmann::json e{{"file", relative_to(paths[i], root)}};
        try {
            dicom::parse_options po;
            po.stop_before_pixel_data = true;
            const auto file = dicom::read_file(paths[i], po);
            const auto key = collection::patient_key(file.data);
            const auto* values = store.find(key);
            e["patientHash"] = engine::redacted_hash(key, opts.hash_salt);
            nlohmann::json elements = nlohmann::json::array();
            std::map<std::string, std::size_t> counts;
            for (const auto& c : classifier::classify_dataset(file.data, {cfg, keywords, values ? *values : none})) {
                counts[std::string(classifier::to_string(c.kind))]++;
                if (c.kind == classifier::category::clean && !opts.include_clean) continue;
                nlohmann::json evidence = nlohmann::json::object();
                if (!c.why.rule.empty()) evidence["rule"] = c.why.rule;
                if (!c.why.keyword.empty()) evidence["keyword"] = c.why.keyword;
                if (!c.why.matched.empty()) {
                    evidence["matchedHash"] = engine::redacted_hash(c.why.matched, opts.hash_salt);
                    evidence["score"] = c.why.score;
                }
                nlohmann::json j{{"tagPath", c.path.to_string()},
                                 {"vr", std::string(dicom::to_string(c.vr))},
                                 {"category", std::string(classifier::to_string(c.kind))},
                                 {"action", std::string(config::to_string(engine::resolve_action(c, cfg).kind))},
                                 {"evidence", evidence},
                                 {"excerpt", c.excerpt}};
                elements.push_back(std::move(j));
            }
            e["counts"] = counts;
            e["elements"] = elements;
        } catch (const std::exception& ex) {
            e["error"] = ex.what();
        }
        entries[i] = std::move(e);
    });
    return {{"tool", tool_version}, {"configDigest", config_digest(cfg)}, {"files", entries}};
}

std::vector<classifier::keyword_candidate> train_keywords(const std::filesystem::path& in,
                                                          const sensible_value_store& seeds) {
    const auto paths = collection::scan_directory(in);
    std::vector<dicom::dicom_file> headers;
    headers.reserve(paths.size());
    std::vector<std::string> keys;
    for (const auto& p : paths) {
        try {
            dicom::parse_options po;
            po.stop_before_pixel_data = true;
            headers.push_back(dicom::read_file(p, po));
            keys.push_back(collection::patient_key(headers.back().data));
        } catch (const std::exception&) {
            // unreadable files are not mined
        }
    }
    std::vector<classifier::corpus_document> corpus;
    for (std::size_t i = 0; i < headers.size(); ++i) corpus.push_back({keys[i], &headers[i].data});
    return classifier::deep_search(corpus, seeds);
}

nlohmann::json candidates_to_json(const std::vector<classifier::keyword_candidate>& candidates) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : candidates) {
        out.push_back({{"word", c.word},
                       {"pool", std::string(classifier::to_string(c.pool))},
                       {"frequency", c.frequency()},
                       {"primary", c.primary},
                       {"secondary", c.secondary},
                       {"contexts", c.contexts}});
    }
    return out;
}

}  // namespace deid::pipeline
