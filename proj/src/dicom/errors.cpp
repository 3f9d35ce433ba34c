#include "deid/dicom/errors.hpp"

namespace deid::dicom {

const char* to_string(errc code) noexcept {
    switch (code) {
        case errc::truncated_file: return "TruncatedFile";
        case errc::unsupported_transfer_syntax: return "UnsupportedTransferSyntax";
        case errc::invalid_magic: return "InvalidMagic";
        case errc::malformed_dataset: return "MalformedDataset";
        case errc::value_too_long: return "ValueTooLong";
        case errc::unsupported_pixel_format: return "UnsupportedPixelFormat";
        case errc::size_mismatch: return "SizeMismatch";
    }
    return "DicomError";
}

}  // namespace deid::dicom
