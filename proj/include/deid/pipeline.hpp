/**
 * @file pipeline.hpp
 * @brief Whole-collection runs: sort, harvest, classify, de-identify, scrub.
 *
 * Work is split in two phases. A sequential pass reads every header once,
 * harvests each patient's sensitive values and assigns mapped UIDs in
 * hierarchy order, so the result does not depend on thread scheduling.
 * A parallel pass then processes files independently and writes each
 * output atomically (temporary file, then rename).
 */

#pragma once

#include "deid/audit.hpp"
#include "deid/classifier.hpp"
#include "deid/collection.hpp"
#include "deid/config.hpp"
#include "deid/engine.hpp"
#include "deid/ocr.hpp"
#include "deid/scrub.hpp"
#include "deid/store.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace deid::pipeline {

inline constexpr std::string_view tool_version = "dicom-deid 1.0.0";

enum exit_code : int { ok = 0, fatal = 1, completed_with_skips = 2, findings = 3 };

struct run_options {
    std::filesystem::path in;
    std::filesystem::path out;
    std::optional<std::filesystem::path> report;
    unsigned threads = 1;
    bool dry_run = false;
    bool deid = true;   ///< header de-identification
    bool scrub = true;  ///< burned-in text redaction
    std::optional<std::filesystem::path> uid_map;
    std::optional<std::string> uid_map_key;  ///< encrypts the saved map
    std::optional<std::filesystem::path> store_out;
    /// Used instead of harvesting (scrub-only runs on processed files).
    std::optional<sensible_value_store> store;
    std::optional<std::filesystem::path> hierarchy_dump;
    std::string hash_salt;
    /// Replaces the configured engine factory (tests, benchmarks).
    std::optional<ocr::engine_pool::factory> engine;
    std::function<void(const std::string&)> log;
};

struct file_entry {
    std::string file;  ///< relative to the input root
    std::string patient_hash;
    std::string status;  ///< written, dry-run, skipped
    std::string error;
    std::vector<std::string> flags;
    std::vector<engine::action_record> actions;
    std::map<config::action_kind, std::size_t> action_counts;
    std::vector<scrub::redaction_record> redactions;
};

struct run_report {
    std::string config_digest;
    std::vector<std::string> stages;
    bool dry_run = false;
    double duration_seconds = 0;
    std::size_t files_in = 0;
    std::vector<file_entry> files;  ///< every input, in hierarchy order then skipped inputs
    std::vector<collection::duplicate> duplicates;
    std::vector<std::string> warnings;
    bool aborted = false;  ///< strict mode stopped at an error

    [[nodiscard]] std::size_t files_out() const;
    [[nodiscard]] std::size_t skipped() const;
    [[nodiscard]] std::size_t flagged() const;
    [[nodiscard]] std::size_t redactions() const;
    [[nodiscard]] std::map<config::action_kind, std::size_t> action_totals() const;
    [[nodiscard]] int exit_status() const;
    [[nodiscard]] nlohmann::json to_json(const std::string& hash_salt) const;
};

/// Full or partial run over `opts.in`. Throws only for fatal setup
/// problems (unreadable input root, bad UID map); per-file problems are
/// recorded in the report.
run_report run(const config::config& cfg, const run_options& opts);

/// Per-element classification of every file, for inspection.
struct classify_options {
    std::filesystem::path in;
    unsigned threads = 1;
    bool include_clean = false;
    std::string hash_salt;
};
[[nodiscard]] nlohmann::json classify_collection(const config::config& cfg, const classify_options& opts);

/// Harvest the sensible values of every patient under `in`.
[[nodiscard]] sensible_value_store harvest_collection(const config::config& cfg, const std::filesystem::path& in,
                                                      unsigned threads = 1);

/// Keyword mining over `in` with the given seeds.
[[nodiscard]] std::vector<classifier::keyword_candidate> train_keywords(const std::filesystem::path& in,
                                                                        const sensible_value_store& seeds);
[[nodiscard]] nlohmann::json candidates_to_json(const std::vector<classifier::keyword_candidate>& candidates);

/// Digest of the serialized configuration, hex.
[[nodiscard]] std::string config_digest(const config::config& cfg);

/// Write bytes to `path` through a temporary file in the same directory.
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// A fresh random salt for report hashes.
[[nodiscard]] std::string random_salt();

}  // namespace deid::pipeline
