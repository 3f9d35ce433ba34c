#include "deid/engine.hpp"

#include "deid/text.hpp"

#include <json.hpp>
#include <sodium.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

namespace deid::engine {

using config::action_kind;
using config::action_spec;
using dicom::vr;
namespace chr = std::chrono;

namespace {

constexpr std::int64_t seconds_per_day = 86400;

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int to_int(std::string_view s) {
    int v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

std::string two(int v) {
    std::array<char, 3> b{};
    b[0] = static_cast<char>('0' + v / 10);
    b[1] = static_cast<char>('0' + v % 10);
    return {b.data(), 2};
}

std::string four(int v) { return two(v / 100) + two(v % 100); }

chr::year_month_day parse_ymd(std::string_view s, std::string_view original) {
    if (s.size() != 8 || !all_digits(s)) throw deid_error(errc::malformed_date, "malformed date '" + std::string(original) + "'");
    const chr::year_month_day d{chr::year{to_int(s.substr(0, 4))}, chr::month{static_cast<unsigned>(to_int(s.substr(4, 2)))},
                                chr::day{static_cast<unsigned>(to_int(s.substr(6, 2)))}};
    if (!d.ok()) throw deid_error(errc::malformed_date, "invalid calendar date '" + std::string(original) + "'");
    return d;
}

std::string format_ymd(const chr::year_month_day& d, std::string_view original) {
    const int y = static_cast<int>(d.year());
    if (y < 1 || y > 9999) throw deid_error(errc::malformed_date, "shifted date out of range for '" + std::string(original) + "'");
    return four(y) + two(static_cast<int>(static_cast<unsigned>(d.month()))) +
           two(static_cast<int>(static_cast<unsigned>(d.day())));
}

std::int64_t floor_mod(std::int64_t a, std::int64_t m) {
    const auto r = a % m;
    return r < 0 ? r + m : r;
}

std::int64_t floor_div(std::int64_t a, std::int64_t m) { return (a - floor_mod(a, m)) / m; }

struct time_parts {
    int hh = 0, mm = 0, ss = 0;
    std::size_t components = 0;  ///< 1, 2 or 3
    std::string fraction;        ///< including the dot, or empty
};

time_parts parse_time(std::string_view t, std::string_view original, errc code) {
    time_parts p;
    std::string_view main = t;
    if (auto dot = t.find('.'); dot != std::string_view::npos) {
        main = t.substr(0, dot);
        p.fraction = std::string(t.substr(dot));
        const auto digits = std::string_view(p.fraction).substr(1);
        if (main.size() != 6 || digits.empty() || digits.size() > 6 || !all_digits(digits)) {
            throw deid_error(code, "malformed time '" + std::string(original) + "'");
        }
    }
    if ((main.size() != 2 && main.size() != 4 && main.size() != 6) || !all_digits(main)) {
        throw deid_error(code, "malformed time '" + std::string(original) + "'");
    }
    p.components = main.size() / 2;
    p.hh = to_int(main.substr(0, 2));
    if (p.components > 1) p.mm = to_int(main.substr(2, 2));
    if (p.components > 2) p.ss = to_int(main.substr(4, 2));
    // 60 is allowed for leap seconds
    if (p.hh > 23 || p.mm > 59 || p.ss > 60) throw deid_error(code, "malformed time '" + std::string(original) + "'");
    return p;
}

std::string format_time(std::int64_t seconds_of_day, const time_parts& p) {
    const auto h = static_cast<int>(seconds_of_day / 3600);
    const auto m = static_cast<int>(seconds_of_day / 60 % 60);
    const auto s = static_cast<int>(seconds_of_day % 60);
    std::string out = two(h);
    if (p.components > 1) out += two(m);
    if (p.components > 2) out += two(s);
    return out + p.fraction;
}

std::int64_t seconds_of(const time_parts& p) {
    return std::int64_t{p.hh} * 3600 + std::int64_t{p.mm} * 60 + std::min(p.ss, 59);
}

bool is_standard_uid(std::string_view uid) { return uid.starts_with("1.2.840.10008."); }

std::string hex(const unsigned char* data, std::size_t n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        out += digits[data[i] >> 4U];
        out += digits[data[i] & 0xFU];
    }
    return out;
}

void ensure_sodium() {
    static const int ok = sodium_init();
    if (ok < 0) throw std::runtime_error("libsodium failed to initialize");
}

std::string to_base64(const unsigned char* data, std::size_t n) {
    std::string out(sodium_base64_ENCODED_LEN(n, sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), data, n, sodium_base64_VARIANT_ORIGINAL);
    out.resize(std::strlen(out.c_str()));
    return out;
}

std::vector<unsigned char> from_base64(const std::string& s) {
    std::vector<unsigned char> out(s.size());
    std::size_t len = 0;
    if (sodium_base642bin(out.data(), out.size(), s.data(), s.size(), nullptr, &len, nullptr,
                          sodium_base64_VARIANT_ORIGINAL) != 0) {
        throw deid_error(errc::bad_uid_map, "uid map: invalid base64");
    }
    out.resize(len);
    return out;
}

std::array<unsigned char, crypto_secretbox_KEYBYTES> derive_key(const std::string& passphrase) {
    std::array<unsigned char, crypto_secretbox_KEYBYTES> key{};
    crypto_generichash(key.data(), key.size(), reinterpret_cast<const unsigned char*>(passphrase.data()),
                       passphrase.size(), nullptr, 0);
    return key;
}

std::vector<std::string> split_values(const dicom::data_element& el) { return el.strings(); }

void set_values(dicom::data_element& el, const std::vector<std::string>& values) { el.set_strings(values); }

/// Binary numeric VRs: encode `count` copies of `number`.
std::vector<std::uint8_t> encode_binary(vr v, double number, std::size_t count) {
    std::vector<std::uint8_t> out;
    auto put = [&](const auto value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        out.insert(out.end(), p, p + sizeof(value));
    };
    for (std::size_t i = 0; i < count; ++i) {
        switch (v) {
            case vr::US: put(static_cast<std::uint16_t>(number)); break;
            case vr::SS: put(static_cast<std::int16_t>(number)); break;
            case vr::UL: put(static_cast<std::uint32_t>(number)); break;
            case vr::SL: put(static_cast<std::int32_t>(number)); break;
            case vr::UV: put(static_cast<std::uint64_t>(number)); break;
            case vr::SV: put(static_cast<std::int64_t>(number)); break;
            case vr::FL: put(static_cast<float>(number)); break;
            case vr::FD: put(number); break;
            default: break;
        }
    }
    return out;
}

/// Replace the whole value with `replacement`, keeping the value count.
void replace_value(dicom::data_element& el, const std::string& replacement) {
    if (el.is_sequence()) {
        el.items.clear();
        return;
    }
    if (dicom::is_binary_numeric(el.vr)) {
        const auto width = dicom::binary_width(el.vr);
        const std::size_t count = std::max<std::size_t>(1, width == 0 ? 1 : el.bytes.size() / width);
        double number = 0;
        try {
            number = std::stod(replacement);
        } catch (const std::exception&) {
            number = 0;
        }
        el.set_bytes(encode_binary(el.vr, number, count));
        return;
    }
    if (dicom::is_string(el.vr)) {
        const auto count = std::max<std::size_t>(1, split_values(el).size());
        set_values(el, std::vector<std::string>(count, replacement));
        return;
    }
    el.set_string(replacement);
}

void replace_default(dicom::data_element& el, const config::config& cfg) {
    if (auto it = cfg.vr_defaults.find(el.vr); it != cfg.vr_defaults.end() && !el.is_sequence()) {
        replace_value(el, it->second);
    } else {
        el.clear_value();
    }
}

std::string cap_age(std::string_view age) {
    if (age.size() == 4 && age[3] == 'Y' && all_digits(age.substr(0, 3)) && to_int(age.substr(0, 3)) > 89) {
        return "090Y";
    }
    return std::string(age);
}

}  // namespace

std::string shift_date(std::string_view da, std::int64_t days) {
    const auto d = parse_ymd(da, da);
    return format_ymd(chr::year_month_day{chr::sys_days{d} + chr::days{days}}, da);
}

std::string shift_time(std::string_view tm, std::int64_t seconds) {
    const auto p = parse_time(tm, tm, errc::malformed_time);
    const auto shifted = floor_mod(seconds_of(p) + floor_mod(seconds, seconds_per_day), seconds_per_day);
    return format_time(shifted, p);
}

std::string shift_datetime(std::string_view dt, std::int64_t days, std::int64_t seconds) {
    std::string_view body = dt;
    std::string suffix;
    if (auto sign = dt.find_first_of("+-"); sign != std::string_view::npos) {
        body = dt.substr(0, sign);
        suffix = std::string(dt.substr(sign));
    }
    if (body.size() < 8) throw deid_error(errc::malformed_date, "datetime without a full date '" + std::string(dt) + "'");
    auto date = parse_ymd(body.substr(0, 8), dt);
    const auto rest = body.substr(8);
    if (rest.empty()) {
        if (seconds != 0) days += floor_div(seconds, seconds_per_day);
        return format_ymd(chr::year_month_day{chr::sys_days{date} + chr::days{days}}, dt) + suffix;
    }
    const auto p = parse_time(rest, dt, errc::malformed_date);
    const auto total = seconds_of(p) + seconds;
    days += floor_div(total, seconds_per_day);
    const auto shifted_date = format_ymd(chr::year_month_day{chr::sys_days{date} + chr::days{days}}, dt);
    return shifted_date + format_time(floor_mod(total, seconds_per_day), p) + suffix;
}

// ---------------------------------------------------------------------------

uid_map::uid_map(std::string root) : root_(std::move(root)) {}

uid_map::uid_map(const uid_map& other) {
    std::lock_guard lock(other.mutex_);
    root_ = other.root_;
    counter_ = other.counter_;
    forward_ = other.forward_;
    generated_ = other.generated_;
}

std::string uid_map::remap(std::string_view uid) {
    std::string key(uid);
    std::lock_guard lock(mutex_);
    if (auto it = forward_.find(key); it != forward_.end()) return it->second;
    if (generated_.contains(key)) return key;
    std::string value;
    do {
        value = root_ + "." + std::to_string(++counter_);
    } while (forward_.contains(value));
    if (value.size() > 64) throw deid_error(errc::bad_uid_map, "generated UID longer than 64 characters");
    forward_.emplace(std::move(key), value);
    generated_.insert(value);
    return value;
}

std::optional<std::string> uid_map::lookup(std::string_view uid) const {
    std::lock_guard lock(mutex_);
    if (auto it = forward_.find(std::string(uid)); it != forward_.end()) return it->second;
    return std::nullopt;
}

std::size_t uid_map::size() const {
    std::lock_guard lock(mutex_);
    return forward_.size();
}

std::string uid_map::to_json() const {
    std::lock_guard lock(mutex_);
    // sorted for stable files
    std::map<std::string, std::string> sorted(forward_.begin(), forward_.end());
    nlohmann::json doc{{"root", root_}, {"counter", counter_}, {"map", sorted}};
    return doc.dump(2);
}

uid_map uid_map::from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
        uid_map m(doc.at("root").get<std::string>());
        m.counter_ = doc.at("counter").get<std::uint64_t>();
        for (const auto& [k, v] : doc.at("map").items()) {
            m.forward_.emplace(k, v.get<std::string>());
            m.generated_.insert(v.get<std::string>());
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw deid_error(errc::bad_uid_map, std::string("uid map: ") + e.what());
    }
}

void uid_map::save(const std::filesystem::path& path, const std::optional<std::string>& passphrase) const {
    std::string payload = to_json();
    if (passphrase) {
        ensure_sodium();
        const auto key = derive_key(*passphrase);
        std::array<unsigned char, crypto_secretbox_NONCEBYTES> nonce{};
        randombytes_buf(nonce.data(), nonce.size());
        std::vector<unsigned char> cipher(payload.size() + crypto_secretbox_MACBYTES);
        crypto_secretbox_easy(cipher.data(), reinterpret_cast<const unsigned char*>(payload.data()), payload.size(),
                              nonce.data(), key.data());
        payload = nlohmann::json{{"format", "secretbox-v1"},
                                 {"nonce", to_base64(nonce.data(), nonce.size())},
                                 {"ciphertext", to_base64(cipher.data(), cipher.size())}}
                      .dump(2);
    }
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << payload;
        if (!out) throw std::runtime_error("cannot write uid map '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

uid_map uid_map::load(const std::filesystem::path& path, const std::optional<std::string>& passphrase) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw deid_error(errc::bad_uid_map, "cannot read uid map '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto text = buf.str();
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_object() && doc.value("format", "") == "secretbox-v1") {
        if (!passphrase) throw deid_error(errc::bad_uid_map, "uid map is encrypted and no key was given");
        ensure_sodium();
        const auto key = derive_key(*passphrase);
        const auto nonce = from_base64(doc.at("nonce").get<std::string>());
        const auto cipher = from_base64(doc.at("ciphertext").get<std::string>());
        if (nonce.size() != crypto_secretbox_NONCEBYTES || cipher.size() < crypto_secretbox_MACBYTES) {
            throw deid_error(errc::bad_uid_map, "uid map: truncated ciphertext");
        }
        std::string plain(cipher.size() - crypto_secretbox_MACBYTES, '\0');
        if (crypto_secretbox_open_easy(reinterpret_cast<unsigned char*>(plain.data()), cipher.data(), cipher.size(),
                                       nonce.data(), key.data()) != 0) {
            throw deid_error(errc::bad_uid_map, "uid map: wrong key or corrupted file");
        }
        return from_json(plain);
    }
    return from_json(text);
}

// ---------------------------------------------------------------------------

std::int64_t patient_date_shift(const config::config& cfg, std::string_view patient_key) {
    std::int64_t shift = cfg.date_shift_days;
    if (!cfg.per_patient_shift_salt) return shift;
    ensure_sodium();
    const auto& salt = *cfg.per_patient_shift_salt;
    std::array<unsigned char, 8> digest{};
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, digest.size());
    crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(salt.data()), salt.size());
    const unsigned char separator = 0;
    crypto_generichash_update(&st, &separator, 1);
    crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(patient_key.data()), patient_key.size());
    crypto_generichash_final(&st, digest.data(), digest.size());
    std::uint64_t h = 0;
    for (const auto b : digest) h = (h << 8U) | b;
    const auto span = static_cast<std::uint64_t>(cfg.per_patient_shift_max_days) * 2 + 1;
    return shift + static_cast<std::int64_t>(h % span) - cfg.per_patient_shift_max_days;
}

std::string redacted_hash(std::string_view value, std::string_view salt) {
    ensure_sodium();
    std::array<unsigned char, 12> digest{};
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, digest.size());
    crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(salt.data()), salt.size());
    const unsigned char separator = 0;
    crypto_generichash_update(&st, &separator, 1);
    crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(value.data()), value.size());
    crypto_generichash_final(&st, digest.data(), digest.size());
    return hex(digest.data(), digest.size());
}

action_spec resolve_action(const classifier::classification& c, const config::config& cfg) {
    if (classifier::is_structural(c.tag)) return {action_kind::keep, {}};
    const config::tag_pattern* best = nullptr;
    const action_spec* chosen = nullptr;
    for (const auto& [pattern, spec] : cfg.custom_actions) {
        if (!pattern.matches(c.tag, c.vr)) continue;
        if (best == nullptr || pattern.specificity() > best->specificity()) {
            best = &pattern;
            chosen = &spec;
        }
    }
    if (chosen != nullptr) return *chosen;

    using classifier::category;
    switch (c.kind) {
        case category::identity:
        case category::sensible_match:
        case category::institution:
        case category::geographic:
        case category::person_context: return {action_kind::replace_default, {}};
        case category::date_time:
            return {c.vr == vr::TM ? action_kind::shift_time : action_kind::shift_date, {}};
        case category::uid: return {action_kind::remap_uid, {}};
        case category::private_tag: return {action_kind::zero_length, {}};
        case category::clean: break;
    }
    return {action_kind::keep, {}};
}

applied apply_action(dicom::data_element& el, const action_spec& action, const deid_context& ctx,
                     const config::config& cfg) {
    const bool strict = cfg.strictness == dicom::strictness::strict;
    applied result;
    result.performed = action.kind;

    auto fallback = [&](const std::string& why) {
        replace_default(el, cfg);
        result.performed = action_kind::replace_default;
        result.result = outcome::modified;
        result.note = why;
        return result;
    };

    if (!config::action_legal_for(action.kind, el.vr)) {
        const std::string why = std::string(config::to_string(action.kind)) + " is not applicable to VR " +
                                std::string(dicom::to_string(el.vr)) + " at " + el.tag.to_string();
        if (strict) throw deid_error(errc::illegal_action, why);
        return fallback(why);
    }

    switch (action.kind) {
        case action_kind::keep:
            if (cfg.cap_age_90 && el.tag == dicom::tags::patient_age) {
                const auto v = el.value_string();
                if (const auto capped = cap_age(v); capped != v) {
                    el.set_string(capped);
                    result.result = outcome::modified;
                }
            }
            return result;
        case action_kind::remove: result.result = outcome::removed; return result;
        case action_kind::zero_length: el.clear_value(); result.result = outcome::modified; return result;
        case action_kind::replace_default: replace_default(el, cfg); result.result = outcome::modified; return result;
        case action_kind::replace_with: replace_value(el, action.value); result.result = outcome::modified; return result;
        case action_kind::shift_date:
        case action_kind::shift_time: {
            auto values = split_values(el);
            try {
                for (auto& v : values) {
                    if (v.empty()) continue;
                    if (el.vr == vr::DA) v = shift_date(v, ctx.date_shift_days);
                    else if (el.vr == vr::TM) v = shift_time(v, ctx.time_shift_seconds);
                    else if (action.kind == action_kind::shift_date) v = shift_datetime(v, ctx.date_shift_days, 0);
                    else v = shift_datetime(v, 0, ctx.time_shift_seconds);
                }
            } catch (const deid_error& e) {
                if (strict) throw;
                return fallback(e.what());
            }
            set_values(el, values);
            result.result = outcome::modified;
            return result;
        }
        case action_kind::remap_uid: {
            auto values = split_values(el);
            for (auto& v : values) {
                if (!v.empty() && !is_standard_uid(v)) v = ctx.uids.remap(v);
            }
            set_values(el, values);
            result.result = outcome::modified;
            return result;
        }
    }
    return result;
}

bool already_deidentified(const dicom::dataset& ds) {
    const auto removed = ds.get_string(dicom::tags::patient_identity_removed);
    const auto method = ds.get_string(dicom::tags::deidentification_method);
    return removed && *removed == "YES" && method && method->starts_with(method_name.substr(0, method_name.find(' ')));
}

dataset_report deid_dataset(dicom::dataset& ds, const std::vector<classifier::classification>& classifications,
                            const deid_context& ctx, const config::config& cfg, std::string_view hash_salt) {
    dataset_report report;
    const bool rerun = already_deidentified(ds);

    struct removal {
        dicom::element_path path;
    };
    std::vector<removal> removals;

    for (const auto& c : classifications) {
        auto* el = dicom::resolve(ds, c.path);
        if (el == nullptr) continue;  // inside a sequence that was already cleared
        auto action = resolve_action(c, cfg);
        if (rerun && (action.kind == action_kind::shift_date || action.kind == action_kind::shift_time)) {
            action = {action_kind::keep, {}};
        }
        const auto before = el->is_sequence() ? std::string() : std::string(el->raw_string());
        const auto had_items = el->items.size();
        const auto done = apply_action(*el, action, ctx, cfg);
        report.counts[done.performed] += 1;
        if (done.result == outcome::kept) continue;

        action_record r;
        r.path = c.path.to_string();
        r.kind = c.kind;
        r.action = done.performed;
        r.old_hash = redacted_hash(before.empty() && had_items ? "<sequence>" : before, hash_salt);
        r.note = done.note;
        if (done.result == outcome::removed) {
            removals.push_back({c.path});
        } else {
            if (el->raw_string() == before && el->items.size() == had_items) {
                report.counts[done.performed] -= 1;
                report.counts[action_kind::keep] += 1;
                continue;  // value was already what the action produces
            }
            r.new_value = dicom::is_string(el->vr) ? el->value_string() : std::string();
        }
        report.records.push_back(std::move(r));
    }

    // deepest first, so removing a parent never invalidates a later path
    std::stable_sort(removals.begin(), removals.end(),
                     [](const removal& a, const removal& b) { return a.path.depth() > b.path.depth(); });
    for (const auto& r : removals) {
        if (r.path.parents.empty()) {
            ds.erase(r.path.leaf);
            continue;
        }
        dicom::element_path parent_path{{r.path.parents.begin(), r.path.parents.end() - 1}, r.path.parents.back().sequence};
        auto* parent = dicom::resolve(ds, parent_path);
        if (parent == nullptr || r.path.parents.back().item >= parent->items.size()) continue;
        parent->items[r.path.parents.back().item].erase(r.path.leaf);
    }

    ds.set_string(dicom::tags::patient_identity_removed, vr::CS, "YES");
    ds.set_string(dicom::tags::deidentification_method, vr::LO, method_name);
    return report;
}

dataset_report deid_file(dicom::dicom_file& file, const std::vector<classifier::classification>& classifications,
                         const deid_context& ctx, const config::config& cfg, std::string_view hash_salt) {
    auto report = deid_dataset(file.data, classifications, ctx, cfg, hash_salt);
    if (auto sop = file.data.get_string(dicom::tags::sop_instance_uid); sop && file.meta.contains(dicom::tags::media_storage_sop_instance_uid)) {
        file.meta.set_string(dicom::tags::media_storage_sop_instance_uid, vr::UI, *sop);
    }
    return report;
}

std::vector<std::string> uids_to_remap(const dicom::dataset& ds,
                                       const std::vector<classifier::classification>& classifications,
                                       const config::config& cfg) {
    std::vector<std::string> out;
    for (const auto& c : classifications) {
        if (resolve_action(c, cfg).kind != action_kind::remap_uid || c.vr != vr::UI) continue;
        const auto* el = dicom::resolve(ds, c.path);
        if (el == nullptr) continue;
        for (const auto& v : el->strings()) {
            if (!v.empty() && !is_standard_uid(v)) out.push_back(v);
        }
    }
    return out;
}

}  // namespace deid::engine
