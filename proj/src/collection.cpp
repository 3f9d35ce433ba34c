#include "deid/collection.hpp"

#include "deid/dicom/file.hpp"

#include <sodium.h>

#include <algorithm>
#include <atomic>
#include <thread>
#include <variant>

namespace deid::collection {

namespace {

struct header {
    std::string patient, study, series;
    instance inst;
};

using parsed = std::variant<header, std::string>;

parsed read_header(const std::filesystem::path& path) {
    try {
        const auto bytes = dicom::read_bytes(path);
        dicom::parse_options opts;
        opts.stop_before_pixel_data = true;
        const auto file = dicom::parse_file(bytes, opts);
        const auto& ds = file.data;
        std::optional<std::string> sentinel;
        auto uid_or_sentinel = [&](dicom::tag t) {
            if (auto v = ds.get_string(t); v && !v->empty()) return *v;
            if (!sentinel) sentinel = sentinel_key(bytes);
            return *sentinel;
        };
        header h;
        h.patient = patient_key(ds);
        h.study = uid_or_sentinel(dicom::tags::study_instance_uid);
        h.series = uid_or_sentinel(dicom::tags::series_instance_uid);
        h.inst.sop_uid = uid_or_sentinel(dicom::tags::sop_instance_uid);
        h.inst.path = path;
        h.inst.number = ds.get_int(dicom::tags::instance_number);
        return h;
    } catch (const std::exception& e) {
        return std::string(e.what());
    }
}

bool instance_less(const instance& a, const instance& b) {
    // files without an InstanceNumber go last
    if (a.number.has_value() != b.number.has_value()) return a.number.has_value();
    if (a.number != b.number) return *a.number < *b.number;
    if (a.sop_uid != b.sop_uid) return a.sop_uid < b.sop_uid;
    return a.path < b.path;
}

std::string rel(const std::filesystem::path& p, const std::filesystem::path& root) {
    return root.empty() ? p.generic_string() : p.lexically_relative(root).generic_string();
}

}  // namespace

std::string patient_key(const dicom::dataset& ds) {
    if (auto id = ds.get_string(dicom::tags::patient_id); id && !id->empty()) return *id;
    return std::string(unknown_patient);
}

std::string sentinel_key(std::span<const std::uint8_t> file_bytes) {
    static const int ok = sodium_init();
    (void)ok;
    std::array<unsigned char, 12> digest{};
    crypto_generichash(digest.data(), digest.size(), file_bytes.data(), file_bytes.size(), nullptr, 0);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out = "UNKNOWN-";
    for (const auto b : digest) {
        out += hex[b >> 4U];
        out += hex[b & 0xFU];
    }
    return out;
}

std::vector<std::filesystem::path> scan_directory(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> out;
    if (std::filesystem::is_regular_file(root)) return {root};
    for (auto it = std::filesystem::recursive_directory_iterator(root); it != std::filesystem::recursive_directory_iterator(); ++it) {
        const auto name = it->path().filename().string();
        if (name.starts_with(".")) {
            if (it->is_directory()) it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file()) continue;
        if (name.ends_with(".ocr.json")) continue;
        out.push_back(it->path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

counts hierarchy::counts() const {
    collection::counts c;
    c.patients = patients.size();
    for (const auto& [_, p] : patients) {
        c.studies += p.studies.size();
        for (const auto& [__, st] : p.studies) {
            c.series += st.series.size();
            for (const auto& [___, se] : st.series) c.instances += se.instances.size();
        }
    }
    return c;
}

std::map<std::string, std::vector<std::filesystem::path>> hierarchy::files_by_patient() const {
    std::map<std::string, std::vector<std::filesystem::path>> out;
    for (const auto& [key, p] : patients) {
        auto& files = out[key];
        for (const auto& [_, st] : p.studies) {
            for (const auto& [__, se] : st.series) {
                for (const auto& i : se.instances) files.push_back(i.path);
            }
        }
    }
    return out;
}

std::vector<std::filesystem::path> hierarchy::files() const {
    std::vector<std::filesystem::path> out;
    for (auto& [_, files] : files_by_patient()) out.insert(out.end(), files.begin(), files.end());
    return out;
}

std::vector<duplicate> hierarchy::duplicates() const {
    std::map<std::string, std::vector<std::filesystem::path>> by_uid;
    for (const auto& [_, p] : patients) {
        for (const auto& [__, st] : p.studies) {
            for (const auto& [___, se] : st.series) {
                for (const auto& i : se.instances) by_uid[i.sop_uid].push_back(i.path);
            }
        }
    }
    std::vector<duplicate> out;
    for (auto& [uid, paths] : by_uid) {
        if (paths.size() < 2) continue;
        std::sort(paths.begin(), paths.end());
        out.push_back({uid, paths});
    }
    return out;
}

nlohmann::json hierarchy::to_json(const std::filesystem::path& root) const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [pk, p] : patients) {
        nlohmann::json studies = nlohmann::json::object();
        for (const auto& [sk, st] : p.studies) {
            nlohmann::json series_json = nlohmann::json::object();
            for (const auto& [rk, se] : st.series) {
                nlohmann::json list = nlohmann::json::array();
                for (const auto& i : se.instances) {
                    nlohmann::json entry{{"sopInstanceUid", i.sop_uid}, {"path", rel(i.path, root)}};
                    if (i.number) entry["instanceNumber"] = *i.number;
                    list.push_back(entry);
                }
                series_json[rk] = list;
            }
            studies[sk] = series_json;
        }
        out[pk] = studies;
    }
    return {{"patients", out}, {"counts", {{"patients", counts().patients}, {"studies", counts().studies},
                                            {"series", counts().series}, {"instances", counts().instances}}}};
}

sort_result sort_collection(std::span<const std::filesystem::path> paths, unsigned threads) {
    std::vector<parsed> results(paths.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < paths.size(); i = next++) results[i] = read_header(paths[i]);
    };
    const unsigned n = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(paths.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    sort_result out;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (auto* h = std::get_if<header>(&results[i])) {
            out.hierarchy.patients[h->patient].studies[h->study].series[h->series].instances.push_back(std::move(h->inst));
        } else {
            out.skipped.push_back({paths[i], std::get<std::string>(results[i])});
        }
    }
    for (auto& [_, p] : out.hierarchy.patients) {
        for (auto& [__, st] : p.studies) {
            for (auto& [___, se] : st.series) std::sort(se.instances.begin(), se.instances.end(), instance_less);
        }
    }
    return out;
}

}  // namespace deid::collection
