#include "deid/dicom/file.hpp"

#include <cstring>

namespace deid::dicom {

namespace {

class writer {
public:
    writer(bool explicit_vr, const write_options& options) : explicit_(explicit_vr), options_(options) {}

    void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    }

    void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }

    void put_tag(std::vector<std::uint8_t>& out, tag t) {
        put_u16(out, t.group);
        put_u16(out, t.element);
    }

    void put_dataset(std::vector<std::uint8_t>& out, const dataset& ds) {
        for (const auto& [t, el] : ds) put_element(out, el);
    }

    void put_element(std::vector<std::uint8_t>& out, const data_element& el) {
        std::vector<std::uint8_t> sequence_body;
        const std::vector<std::uint8_t>* value = &el.bytes;
        if (el.is_sequence()) {
            for (const auto& item : el.items) put_item(sequence_body, item);
            value = &sequence_body;
        }
        if (value->size() >= 0xFFFFFFFFULL) {
            throw dicom_error(errc::value_too_long, el.tag.to_string() + " exceeds 32-bit length");
        }
        const auto length = static_cast<std::uint32_t>(value->size());
        const bool undefined = el.is_sequence() && el.undefined_length;

        put_tag(out, el.tag);
        if (explicit_) {
            vr v = el.vr;
            if (!has_long_length(v) && length > 0xFFFF) {
                if (options_.strictness == strictness::strict) {
                    throw dicom_error(errc::value_too_long,
                                      el.tag.to_string() + " value of " + std::to_string(length) +
                                          " bytes does not fit VR " + std::string(to_string(v)));
                }
                v = vr::UN;
            }
            const auto code = to_string(v);
            out.push_back(static_cast<std::uint8_t>(code[0]));
            out.push_back(static_cast<std::uint8_t>(code[1]));
            if (has_long_length(v)) {
                put_u16(out, 0);
                put_u32(out, undefined ? 0xFFFFFFFFU : length);
            } else {
                put_u16(out, static_cast<std::uint16_t>(length));
            }
        } else {
            put_u32(out, undefined ? 0xFFFFFFFFU : length);
        }
        out.insert(out.end(), value->begin(), value->end());
        if (undefined) {
            put_tag(out, tags::sequence_delimitation);
            put_u32(out, 0);
        }
    }

    void put_item(std::vector<std::uint8_t>& out, const dataset& item) {
        std::vector<std::uint8_t> body;
        put_dataset(body, item);
        put_tag(out, tags::item);
        put_u32(out, item.undefined_length_item ? 0xFFFFFFFFU : static_cast<std::uint32_t>(body.size()));
        out.insert(out.end(), body.begin(), body.end());
        if (item.undefined_length_item) {
            put_tag(out, tags::item_delimitation);
            put_u32(out, 0);
        }
    }

private:
    bool explicit_;
    write_options options_;
};

std::vector<std::uint8_t> write_meta(const dataset& meta, const write_options& options) {
    writer w(true, options);
    std::vector<std::uint8_t> rest;
    for (const auto& [t, el] : meta) {
        if (t != tags::file_meta_group_length) w.put_element(rest, el);
    }
    std::vector<std::uint8_t> out;
    if (const auto* gl = meta.find(tags::file_meta_group_length)) {
        data_element length_el = *gl;
        length_el.vr = vr::UL;
        length_el.bytes.assign(4, 0);
        const auto n = static_cast<std::uint32_t>(rest.size());
        std::memcpy(length_el.bytes.data(), &n, 4);
        w.put_element(out, length_el);
    }
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

}  // namespace

std::vector<std::uint8_t> write_dataset(const dataset& ds, transfer_syntax ts, const write_options& options) {
    writer w(ts == transfer_syntax::explicit_vr_little_endian, options);
    std::vector<std::uint8_t> out;
    w.put_dataset(out, ds);
    return out;
}

std::vector<std::uint8_t> write_file(const dicom_file& file, const write_options& options) {
    std::vector<std::uint8_t> out;
    if (file.has_preamble) {
        out.assign(file.preamble.begin(), file.preamble.end());
        for (const char ch : {'D', 'I', 'C', 'M'}) out.push_back(static_cast<std::uint8_t>(ch));
        const auto meta = write_meta(file.meta, options);
        out.insert(out.end(), meta.begin(), meta.end());
    }
    const auto body = write_dataset(file.data, file.syntax, options);
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

dicom_file make_file(dataset data, transfer_syntax ts) {
    dicom_file file;
    file.syntax = ts;
    data_element group_length;
    group_length.tag = tags::file_meta_group_length;
    group_length.vr = vr::UL;
    group_length.bytes.assign(4, 0);
    file.meta.set(group_length);

    data_element version;
    version.tag = {0x0002, 0x0001};
    version.vr = vr::OB;
    version.bytes = {0x00, 0x01};
    file.meta.set(version);

    file.meta.set_string(tags::media_storage_sop_class_uid, vr::UI, data.get_string(tags::sop_class_uid).value_or(""));
    file.meta.set_string(tags::media_storage_sop_instance_uid, vr::UI,
                         data.get_string(tags::sop_instance_uid).value_or(""));
    file.meta.set_string(tags::transfer_syntax_uid, vr::UI, transfer_syntax_uid(ts));
    file.meta.set_string({0x0002, 0x0012}, vr::UI, "2.25.298766436125358371123418591212781054322");
    file.meta.set_string({0x0002, 0x0013}, vr::SH, "DICOM_DEID_1");
    file.data = std::move(data);
    return file;
}

}  // namespace deid::dicom
