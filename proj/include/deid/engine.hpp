/**
 * @file engine.hpp
 * @brief Resolve and apply de-identification actions.
 *
 * Dates are shifted by whole days and times by seconds, so intervals
 * between values of one run are preserved. UIDs are remapped through a
 * shared map that is injective and stable for the whole run.
 */

#pragma once

#include "deid/classifier.hpp"
#include "deid/config.hpp"
#include "deid/dicom/dataset.hpp"
#include "deid/dicom/file.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace deid::engine {

/// Written to (0012,0063); also used to recognize our own output.
inline constexpr std::string_view method_name = "DICOM_DEID 1.0.0";

enum class errc { malformed_date, malformed_time, illegal_action, bad_uid_map };

class deid_error : public std::runtime_error {
public:
    deid_error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    [[nodiscard]] errc code() const noexcept { return code_; }

private:
    errc code_;
};

/// Shift a DA value ("YYYYMMDD") by whole days. Throws malformed_date.
[[nodiscard]] std::string shift_date(std::string_view da, std::int64_t days);

/// Shift a TM value (HH[MM[SS[.F{1,6}]]]) modulo 24 hours, keeping the
/// original precision. Throws malformed_time.
[[nodiscard]] std::string shift_time(std::string_view tm, std::int64_t seconds);

/// Shift a DT value. Needs at least YYYYMMDD; components beyond the date,
/// the fraction and a UTC offset suffix are kept. Seconds carry into the
/// date. Throws malformed_date.
[[nodiscard]] std::string shift_datetime(std::string_view dt, std::int64_t days, std::int64_t seconds);

/// Run-wide UID map. Thread safe.
class uid_map {
public:
    explicit uid_map(std::string root);

    /// Existing mapping, or root + "." + next counter value. Values we
    /// generated ourselves map to themselves, so output can be re-processed
    /// with the same map without change.
    std::string remap(std::string_view uid);
    [[nodiscard]] std::optional<std::string> lookup(std::string_view uid) const;
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] const std::string& root() const noexcept { return root_; }

    [[nodiscard]] std::string to_json() const;
    /// Throws deid_error(bad_uid_map) on malformed input.
    [[nodiscard]] static uid_map from_json(std::string_view text);

    /// Plain JSON, or a libsodium secretbox when `passphrase` is given.
    void save(const std::filesystem::path& path, const std::optional<std::string>& passphrase) const;
    [[nodiscard]] static uid_map load(const std::filesystem::path& path, const std::optional<std::string>& passphrase);

    uid_map(const uid_map& other);
    uid_map& operator=(const uid_map&) = delete;

private:
    mutable std::mutex mutex_;
    std::string root_;
    std::uint64_t counter_ = 0;
    std::unordered_map<std::string, std::string> forward_;
    std::unordered_set<std::string> generated_;
};

/// Per-file (really per-patient) shift amounts plus the shared UID map.
struct deid_context {
    uid_map& uids;
    std::int64_t date_shift_days = 0;
    std::int64_t time_shift_seconds = 0;
};

/// Global shift plus, when a salt is configured, a deterministic offset
/// in [-max, +max] days derived from the patient key.
[[nodiscard]] std::int64_t patient_date_shift(const config::config& cfg, std::string_view patient_key);

/// Salted BLAKE2b digest of a value (hex), used instead of raw PHI in reports.
[[nodiscard]] std::string redacted_hash(std::string_view value, std::string_view salt);

[[nodiscard]] config::action_spec resolve_action(const classifier::classification& c, const config::config& cfg);

enum class outcome { kept, modified, removed };

struct applied {
    outcome result = outcome::kept;
    config::action_kind performed = config::action_kind::keep;  ///< after fallbacks
    std::string note;                                         ///< why a fallback happened
};

/// Apply one action to one element. Removal is reported, not performed.
applied apply_action(dicom::data_element& el, const config::action_spec& action, const deid_context& ctx,
                     const config::config& cfg);

struct action_record {
    std::string path;
    classifier::category kind = classifier::category::clean;
    config::action_kind action = config::action_kind::keep;
    std::string old_hash;
    std::string new_value;
    std::string note;
};

struct dataset_report {
    std::vector<action_record> records;  ///< every action except keep
    std::map<config::action_kind, std::size_t> counts;
};

/// True when `ds` carries our de-identification markers.
[[nodiscard]] bool already_deidentified(const dicom::dataset& ds);

/// Apply every classification's action, then set (0012,0062) and (0012,0063).
/// On already de-identified input, shift actions become keep so running
/// twice does not shift twice.
dataset_report deid_dataset(dicom::dataset& ds, const std::vector<classifier::classification>& classifications,
                            const deid_context& ctx, const config::config& cfg, std::string_view hash_salt = {});

/// deid_dataset plus file meta: (0002,0003) follows the new (0008,0018).
dataset_report deid_file(dicom::dicom_file& file, const std::vector<classifier::classification>& classifications,
                         const deid_context& ctx, const config::config& cfg, std::string_view hash_salt = {});

/// Every UID value the classifications would remap, in walk order. Lets a
/// caller assign mapped values in a fixed order before parallel work.
[[nodiscard]] std::vector<std::string> uids_to_remap(const dicom::dataset& ds,
                                                     const std::vector<classifier::classification>& classifications,
                                                     const config::config& cfg);

}  // namespace deid::engine
