#include "deid/audit.hpp"

#include "deid/classifier.hpp"
#include "deid/collection.hpp"
#include "deid/dicom/file.hpp"
#include "deid/engine.hpp"
#include "deid/fuzzy.hpp"
#include "deid/scrub.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <thread>

namespace deid::audit {

namespace {

using dicom::vr;

struct hit {
    std::string location;
    int score = 0;
};

/// value -> first place it was found
using hits = std::map<std::string, hit>;

hits search_header(const dicom::dataset& ds, std::span<const std::string> values, int threshold) {
    hits out;
    if (values.empty()) return out;
    for (const auto& [path, text] : searchable_text(ds)) {
        for (const auto& m : fuzzy::match_sensible(text, values, threshold)) out.emplace(m.value, hit{path, m.score});
    }
    return out;
}

hits search_pixels(const dicom::dicom_file& file, const std::filesystem::path& source,
                   std::span<const std::string> values, int threshold, ocr::engine_pool& pool) {
    hits out;
    if (values.empty() || !file.data.contains(dicom::tags::pixel_data)) return out;
    dicom::pixel_matrix m;
    try {
        m = dicom::decode_pixel_data(file.data);
    } catch (const dicom::dicom_error&) {
        return out;
    }
    const auto r = scrub::read_rescale(file.data);
    if (r.slope == 0.0) return out;
    const auto w = scrub::read_window(file.data);
    auto engine = pool.acquire();
    for (std::uint32_t f = 0; f < m.layout.frames; ++f) {
        const auto img = scrub::to_8bit(m, f, r, w);
        for (const auto& d : ocr::detect_text(img, *engine, {source, f})) {
            const auto b = scrub::redaction_box(d, 0, m.layout.rows, m.layout.cols);
            const auto where = "frame " + std::to_string(f) + " box " + std::to_string(b.x0) + "," + std::to_string(b.y0) +
                               "," + std::to_string(b.x1) + "," + std::to_string(b.y1);
            for (const auto& hm : fuzzy::match_sensible(d.text, values, threshold)) {
                out.emplace(hm.value, hit{where, hm.score});
            }
        }
    }
    return out;
}

struct file_outcome {
    std::vector<finding> findings;
    std::size_t targets = 0;
    std::size_t removed = 0;
    std::optional<std::string> missing;
    std::optional<std::string> unreadable;
};

void tally(file_outcome& out, const std::string& rel, const hits& before, const hits& after, const std::string& salt) {
    for (const auto& [value, _] : before) {
        ++out.targets;
        const auto it = after.find(value);
        if (it == after.end()) {
            ++out.removed;
            continue;
        }
        out.findings.push_back({rel, it->second.location, engine::redacted_hash(value, salt), it->second.score});
    }
}

file_outcome audit_file(const std::filesystem::path& original, const std::filesystem::path& counterpart,
                        const std::string& rel, const sensible_value_store& store, const options& opts) {
    file_outcome out;
    dicom::parse_options po;
    po.stop_before_pixel_data = opts.pixels == nullptr;
    dicom::dicom_file before;
    dicom::dicom_file after;
    try {
        before = dicom::read_file(original, po);
    } catch (const std::exception& e) {
        // not something a de-identification run could have produced output for
        out.unreadable = rel + ": " + e.what();
        return out;
    }
    if (!std::filesystem::exists(counterpart)) {
        out.missing = rel;
        return out;
    }
    try {
        after = dicom::read_file(counterpart, po);
    } catch (const std::exception& e) {
        out.unreadable = rel + " (de-identified): " + e.what();
        return out;
    }
    const auto* patient = store.find(collection::patient_key(before.data));
    if (patient == nullptr) return out;
    // person names also as components and words: "doe^john" finds "JOHN DOE".
    // Other values stay whole; splitting "0471 100 1000" would target "100".
    std::vector<std::string> values;
    for (const auto& v : patient->values()) {
        auto expanded = v.find('^') == std::string::npos ? std::vector<std::string>{v} : expand_sensible_value(v);
        for (auto& e : expanded) {
            if (std::find(values.begin(), values.end(), e) == values.end()) values.push_back(std::move(e));
        }
    }

    const auto in_original = search_header(before.data, values, opts.threshold);
    std::vector<std::string> targets;
    for (const auto& [v, _] : in_original) targets.push_back(v);
    tally(out, rel, in_original, search_header(after.data, targets, opts.threshold), opts.hash_salt);

    if (opts.pixels != nullptr) {
        const auto px_before = search_pixels(before, original, values, opts.threshold, *opts.pixels);
        std::vector<std::string> px_targets;
        for (const auto& [v, _] : px_before) px_targets.push_back(v);
        const auto px_after = search_pixels(after, counterpart, px_targets, opts.threshold, *opts.pixels);
        tally(out, rel, px_before, px_after, opts.hash_salt);
    }
    return out;
}

}  // namespace

double audit_score::percent() const noexcept {
    if (total_targets == 0) return 100.0;
    return 100.0 * static_cast<double>(removed) / static_cast<double>(total_targets);
}

nlohmann::json result::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& f : findings) {
        list.push_back({{"file", f.file}, {"location", f.location}, {"valueHash", f.value_hash}, {"score", f.score}});
    }
    return {{"score",
             {{"totalTargets", score.total_targets}, {"removed", score.removed}, {"percent", score.percent()}}},
            {"findings", list},
            {"missing", missing},
            {"unreadable", unreadable}};
}

std::vector<std::pair<std::string, std::string>> searchable_text(const dicom::dataset& ds) {
    std::vector<std::pair<std::string, std::string>> out;
    dicom::walk(ds, [&](const dicom::element_path& path, const dicom::data_element& el) {
        if (el.vr == vr::DA || el.vr == vr::DT || el.vr == vr::TM || el.vr == vr::UI) return;
        if (path.leaf.group == 0x0002) return;
        if (auto text = classifier::text_view(el); text && !text->empty()) out.emplace_back(path.to_string(), *text);
    });
    return out;
}

result scan_residual(const std::filesystem::path& original, const std::filesystem::path& deidentified,
                     const sensible_value_store& store, const options& opts) {
    const auto files = collection::scan_directory(original);
    std::vector<file_outcome> outcomes(files.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < files.size(); i = next++) {
            const auto rel = files[i].lexically_relative(original);
            outcomes[i] = audit_file(files[i], deidentified / rel, rel.generic_string(), store, opts);
        }
    };
    const unsigned n = std::max(1U, std::min<unsigned>(opts.threads, static_cast<unsigned>(files.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    result out;
    for (auto& o : outcomes) {
        if (o.missing) {
            if (opts.strict) throw missing_counterpart("no de-identified counterpart for " + *o.missing);
            out.missing.push_back(*o.missing);
        }
        if (o.unreadable) out.unreadable.push_back(*o.unreadable);
        out.score.total_targets += o.targets;
        out.score.removed += o.removed;
        out.findings.insert(out.findings.end(), o.findings.begin(), o.findings.end());
    }
    return out;
}

}  // namespace deid::audit
