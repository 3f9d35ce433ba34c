#include "deid/dicom/dictionary.hpp"
#include "deid/dicom/file.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace deid::dicom {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

namespace {

constexpr std::uint32_t undefined_length = 0xFFFFFFFFU;

class reader {
public:
    reader(std::span<const std::uint8_t> bytes, bool explicit_vr) : bytes_(bytes), explicit_(explicit_vr) {}

    [[nodiscard]] std::size_t pos() const noexcept { return pos_; }
    [[nodiscard]] bool at_end(std::size_t limit) const noexcept { return pos_ >= limit; }

    dataset read_dataset(std::size_t limit, bool until_item_delimiter, const parse_options& options,
                         int depth) {
        dataset ds;
        std::optional<tag> previous;
        while (pos_ < limit) {
            const tag t = peek_tag();
            if (t == tags::item_delimitation) {
                if (!until_item_delimiter) fail(errc::malformed_dataset, "unexpected item delimiter");
                pos_ += 4;
                if (read_u32() != 0) fail(errc::malformed_dataset, "non-zero item delimiter length");
                return ds;
            }
            if (depth == 0 && options.stop_before_pixel_data && t.group == 0x7FE0) {
                pos_ = limit;
                return ds;
            }
            if (previous && t <= *previous) {
                fail(errc::malformed_dataset, (t == *previous ? "duplicate tag " : "out-of-order tag ") + t.to_string());
            }
            previous = t;
            ds.set(read_element(depth));
            if (pos_ > limit) fail(errc::malformed_dataset, "element overruns its enclosing item");
        }
        if (until_item_delimiter) fail(errc::truncated_file, "missing item delimiter");
        return ds;
    }

private:
    [[noreturn]] void fail(errc code, const std::string& what) const {
        throw dicom_error(code, what + " at offset " + std::to_string(pos_));
    }

    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n || pos_ > bytes_.size()) fail(errc::truncated_file, "input ends mid-element");
    }

    std::uint16_t read_u16() {
        need(2);
        std::uint16_t v;
        std::memcpy(&v, bytes_.data() + pos_, 2);
        pos_ += 2;
        return v;
    }

    std::uint32_t read_u32() {
        need(4);
        std::uint32_t v;
        std::memcpy(&v, bytes_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }

    tag peek_tag() const {
        need(4);
        std::uint16_t g;
        std::uint16_t e;
        std::memcpy(&g, bytes_.data() + pos_, 2);
        std::memcpy(&e, bytes_.data() + pos_ + 2, 2);
        return {g, e};
    }

    data_element read_element(int depth) {
        data_element el;
        el.tag = {read_u16(), read_u16()};
        std::uint32_t length = 0;
        if (explicit_) {
            need(2);
            const std::string_view code(reinterpret_cast<const char*>(bytes_.data() + pos_), 2);
            const auto parsed = parse_vr(code);
            if (!parsed) fail(errc::malformed_dataset, "unknown VR '" + std::string(code) + "' for " + el.tag.to_string());
            el.vr = *parsed;
            pos_ += 2;
            if (has_long_length(el.vr)) {
                if (read_u16() != 0) fail(errc::malformed_dataset, "non-zero reserved bytes");
                length = read_u32();
            } else {
                length = read_u16();
            }
        } else {
            length = read_u32();
            el.vr = lookup_vr(el.tag).value_or(vr::UN);
            if (length == undefined_length) el.vr = vr::SQ;
        }

        if (length == undefined_length) {
            if (el.tag == tags::pixel_data) {
                fail(errc::unsupported_transfer_syntax, "encapsulated pixel data");
            }
            if (el.vr != vr::SQ) fail(errc::malformed_dataset, "undefined length on non-sequence " + el.tag.to_string());
            el.undefined_length = true;
            read_items(el, std::nullopt, depth);
            return el;
        }

        need(length);
        if (el.vr == vr::SQ) {
            read_items(el, pos_ + length, depth);
        } else {
            el.bytes.assign(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                            bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + length));
            pos_ += length;
        }
        return el;
    }

    void read_items(data_element& sq, std::optional<std::size_t> limit, int depth) {
        while (true) {
            if (limit && pos_ >= *limit) {
                if (pos_ > *limit) fail(errc::malformed_dataset, "sequence overruns its length");
                return;
            }
            const tag t{read_u16(), read_u16()};
            const std::uint32_t length = read_u32();
            if (t == tags::sequence_delimitation) {
                if (limit) fail(errc::malformed_dataset, "sequence delimiter inside defined-length sequence");
                return;
            }
            if (t != tags::item) fail(errc::malformed_dataset, "expected item tag, got " + t.to_string());
            if (length == undefined_length) {
                auto item = read_dataset(bytes_.size(), true, {}, depth + 1);
                item.undefined_length_item = true;
                sq.items.push_back(std::move(item));
            } else {
                need(length);
                sq.items.push_back(read_dataset(pos_ + length, false, {}, depth + 1));
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    bool explicit_;
    std::size_t pos_ = 0;

public:
    void seek(std::size_t p) noexcept { pos_ = p; }
};

transfer_syntax syntax_from_uid(std::string_view uid) {
    if (uid == uids::implicit_vr_little_endian) return transfer_syntax::implicit_vr_little_endian;
    if (uid == uids::explicit_vr_little_endian) return transfer_syntax::explicit_vr_little_endian;
    throw dicom_error(errc::unsupported_transfer_syntax, "transfer syntax " + std::string(uid));
}

bool looks_like_bare_dataset(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 8 && bytes[0] == 0x08 && bytes[1] == 0x00;
}

bool looks_explicit(std::span<const std::uint8_t> bytes, std::size_t at) {
    if (bytes.size() < at + 6) return false;
    const std::string_view code(reinterpret_cast<const char*>(bytes.data() + at + 4), 2);
    return parse_vr(code).has_value();
}

}  // namespace

std::string_view transfer_syntax_uid(transfer_syntax ts) noexcept {
    return ts == transfer_syntax::implicit_vr_little_endian ? uids::implicit_vr_little_endian
                                                            : uids::explicit_vr_little_endian;
}

dataset parse_dataset(std::span<const std::uint8_t> bytes, transfer_syntax ts) {
    reader r(bytes, ts == transfer_syntax::explicit_vr_little_endian);
    return r.read_dataset(bytes.size(), false, {}, 0);
}

dicom_file parse_file(std::span<const std::uint8_t> bytes, const parse_options& options) {
    dicom_file file;
    const bool has_magic = bytes.size() >= 132 && std::memcmp(bytes.data() + 128, "DICM", 4) == 0;
    if (!has_magic) {
        if (!looks_like_bare_dataset(bytes)) {
            throw dicom_error(errc::invalid_magic, "no DICM prefix and not a bare data set");
        }
        file.has_preamble = false;
        file.syntax = looks_explicit(bytes, 0) ? transfer_syntax::explicit_vr_little_endian
                                               : transfer_syntax::implicit_vr_little_endian;
        reader r(bytes, file.syntax == transfer_syntax::explicit_vr_little_endian);
        file.data = r.read_dataset(bytes.size(), false, options, 0);
        return file;
    }

    std::copy_n(bytes.begin(), 128, file.preamble.begin());
    reader meta_reader(bytes, true);
    meta_reader.seek(132);
    // file meta runs until the first element outside group 0002
    std::size_t meta_end = 132;
    {
        std::size_t p = 132;
        while (p + 8 <= bytes.size()) {
            std::uint16_t g;
            std::memcpy(&g, bytes.data() + p, 2);
            if (g != 0x0002) break;
            const std::string_view code(reinterpret_cast<const char*>(bytes.data() + p + 4), 2);
            const auto v = parse_vr(code);
            if (!v) throw dicom_error(errc::malformed_dataset, "bad VR in file meta at offset " + std::to_string(p));
            std::uint32_t len = 0;
            if (has_long_length(*v)) {
                if (p + 12 > bytes.size()) throw dicom_error(errc::truncated_file, "file meta truncated");
                std::memcpy(&len, bytes.data() + p + 8, 4);
                p += 12;
            } else {
                std::uint16_t len16;
                std::memcpy(&len16, bytes.data() + p + 6, 2);
                len = len16;
                p += 8;
            }
            if (len == 0xFFFFFFFFU || bytes.size() - p < len) {
                throw dicom_error(errc::truncated_file, "file meta truncated");
            }
            p += len;
        }
        if (p + 8 > bytes.size() && p < bytes.size()) throw dicom_error(errc::truncated_file, "file meta truncated");
        meta_end = p;
    }
    file.meta = meta_reader.read_dataset(meta_end, false, {}, 0);
    const auto ts_uid = file.meta.get_string(tags::transfer_syntax_uid);
    if (!ts_uid) throw dicom_error(errc::malformed_dataset, "file meta lacks (0002,0010) TransferSyntaxUID");
    file.syntax = syntax_from_uid(*ts_uid);

    reader body(bytes, file.syntax == transfer_syntax::explicit_vr_little_endian);
    body.seek(meta_end);
    file.data = body.read_dataset(bytes.size(), false, options, 0);
    return file;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> bytes(size);
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
        throw std::runtime_error("cannot read " + path.string());
    }
    return bytes;
}

dicom_file read_file(const std::filesystem::path& path, const parse_options& options) {
    const auto bytes = read_bytes(path);
    auto file = parse_file(bytes, options);
    file.source_path = path;
    return file;
}

}  // namespace deid::dicom
