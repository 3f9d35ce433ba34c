#include "deid/dicom/dictionary.hpp"

#include <algorithm>
#include <array>

namespace deid::dicom {

namespace {

struct entry {
    std::uint32_t key;
    vr value_representation;
    std::string_view keyword;
};

// Sorted by key. Covers the file meta group, the patient/study/series/
// equipment/image modules and the identifying attributes of the basic
// confidentiality profile.
constexpr std::array entries{
    entry{0x00020000, vr::UL, "FileMetaInformationGroupLength"},
    entry{0x00020001, vr::OB, "FileMetaInformationVersion"},
    entry{0x00020002, vr::UI, "MediaStorageSOPClassUID"},
    entry{0x00020003, vr::UI, "MediaStorageSOPInstanceUID"},
    entry{0x00020010, vr::UI, "TransferSyntaxUID"},
    entry{0x00020012, vr::UI, "ImplementationClassUID"},
    entry{0x00020013, vr::SH, "ImplementationVersionName"},
    entry{0x00020016, vr::AE, "SourceApplicationEntityTitle"},
    entry{0x00080005, vr::CS, "SpecificCharacterSet"},
    entry{0x00080008, vr::CS, "ImageType"},
    entry{0x00080012, vr::DA, "InstanceCreationDate"},
    entry{0x00080013, vr::TM, "InstanceCreationTime"},
    entry{0x00080014, vr::UI, "InstanceCreatorUID"},
    entry{0x00080016, vr::UI, "SOPClassUID"},
    entry{0x00080018, vr::UI, "SOPInstanceUID"},
    entry{0x00080020, vr::DA, "StudyDate"},
    entry{0x00080021, vr::DA, "SeriesDate"},
    entry{0x00080022, vr::DA, "AcquisitionDate"},
    entry{0x00080023, vr::DA, "ContentDate"},
    entry{0x0008002A, vr::DT, "AcquisitionDateTime"},
    entry{0x00080030, vr::TM, "StudyTime"},
    entry{0x00080031, vr::TM, "SeriesTime"},
    entry{0x00080032, vr::TM, "AcquisitionTime"},
    entry{0x00080033, vr::TM, "ContentTime"},
    entry{0x00080050, vr::SH, "AccessionNumber"},
    entry{0x00080060, vr::CS, "Modality"},
    entry{0x00080064, vr::CS, "ConversionType"},
    entry{0x00080070, vr::LO, "Manufacturer"},
    entry{0x00080080, vr::LO, "InstitutionName"},
    entry{0x00080081, vr::ST, "InstitutionAddress"},
    entry{0x00080090, vr::PN, "ReferringPhysicianName"},
    entry{0x00080092, vr::ST, "ReferringPhysicianAddress"},
    entry{0x00080094, vr::SH, "ReferringPhysicianTelephoneNumbers"},
    entry{0x00080100, vr::SH, "CodeValue"},
    entry{0x00080102, vr::SH, "CodingSchemeDesignator"},
    entry{0x00080104, vr::LO, "CodeMeaning"},
    entry{0x00081010, vr::SH, "StationName"},
    entry{0x00081030, vr::LO, "StudyDescription"},
    entry{0x00081032, vr::SQ, "ProcedureCodeSequence"},
    entry{0x0008103E, vr::LO, "SeriesDescription"},
    entry{0x00081040, vr::LO, "InstitutionalDepartmentName"},
    entry{0x00081048, vr::PN, "PhysiciansOfRecord"},
    entry{0x00081050, vr::PN, "PerformingPhysicianName"},
    entry{0x00081060, vr::PN, "NameOfPhysiciansReadingStudy"},
    entry{0x00081070, vr::PN, "OperatorsName"},
    entry{0x00081080, vr::LO, "AdmittingDiagnosesDescription"},
    entry{0x00081090, vr::LO, "ManufacturerModelName"},
    entry{0x00081110, vr::SQ, "ReferencedStudySequence"},
    entry{0x00081111, vr::SQ, "ReferencedPerformedProcedureStepSequence"},
    entry{0x00081115, vr::SQ, "ReferencedSeriesSequence"},
    entry{0x00081120, vr::SQ, "ReferencedPatientSequence"},
    entry{0x00081140, vr::SQ, "ReferencedImageSequence"},
    entry{0x00081150, vr::UI, "ReferencedSOPClassUID"},
    entry{0x00081155, vr::UI, "ReferencedSOPInstanceUID"},
    entry{0x00082111, vr::ST, "DerivationDescription"},
    entry{0x00100010, vr::PN, "PatientName"},
    entry{0x00100020, vr::LO, "PatientID"},
    entry{0x00100021, vr::LO, "IssuerOfPatientID"},
    entry{0x00100030, vr::DA, "PatientBirthDate"},
    entry{0x00100032, vr::TM, "PatientBirthTime"},
    entry{0x00100040, vr::CS, "PatientSex"},
    entry{0x00101000, vr::LO, "OtherPatientIDs"},
    entry{0x00101001, vr::PN, "OtherPatientNames"},
    entry{0x00101005, vr::PN, "PatientBirthName"},
    entry{0x00101010, vr::AS, "PatientAge"},
    entry{0x00101020, vr::DS, "PatientSize"},
    entry{0x00101030, vr::DS, "PatientWeight"},
    entry{0x00101040, vr::LO, "PatientAddress"},
    entry{0x00101060, vr::PN, "PatientMotherBirthName"},
    entry{0x00102154, vr::SH, "PatientTelephoneNumbers"},
    entry{0x00102160, vr::SH, "EthnicGroup"},
    entry{0x00102180, vr::SH, "Occupation"},
    entry{0x001021B0, vr::LT, "AdditionalPatientHistory"},
    entry{0x00104000, vr::LT, "PatientComments"},
    entry{0x00120062, vr::CS, "PatientIdentityRemoved"},
    entry{0x00120063, vr::LO, "DeidentificationMethod"},
    entry{0x00180010, vr::LO, "ContrastBolusAgent"},
    entry{0x00180015, vr::CS, "BodyPartExamined"},
    entry{0x00180050, vr::DS, "SliceThickness"},
    entry{0x00180060, vr::DS, "KVP"},
    entry{0x00181000, vr::LO, "DeviceSerialNumber"},
    entry{0x00181020, vr::LO, "SoftwareVersions"},
    entry{0x00181030, vr::LO, "ProtocolName"},
    entry{0x00181150, vr::IS, "ExposureTime"},
    entry{0x00181151, vr::IS, "XRayTubeCurrent"},
    entry{0x00181152, vr::IS, "Exposure"},
    entry{0x00185101, vr::CS, "ViewPosition"},
    entry{0x0020000D, vr::UI, "StudyInstanceUID"},
    entry{0x0020000E, vr::UI, "SeriesInstanceUID"},
    entry{0x00200010, vr::SH, "StudyID"},
    entry{0x00200011, vr::IS, "SeriesNumber"},
    entry{0x00200012, vr::IS, "AcquisitionNumber"},
    entry{0x00200013, vr::IS, "InstanceNumber"},
    entry{0x00200020, vr::CS, "PatientOrientation"},
    entry{0x00200032, vr::DS, "ImagePositionPatient"},
    entry{0x00200037, vr::DS, "ImageOrientationPatient"},
    entry{0x00200052, vr::UI, "FrameOfReferenceUID"},
    entry{0x00204000, vr::LT, "ImageComments"},
    entry{0x00280002, vr::US, "SamplesPerPixel"},
    entry{0x00280004, vr::CS, "PhotometricInterpretation"},
    entry{0x00280006, vr::US, "PlanarConfiguration"},
    entry{0x00280008, vr::IS, "NumberOfFrames"},
    entry{0x00280010, vr::US, "Rows"},
    entry{0x00280011, vr::US, "Columns"},
    entry{0x00280030, vr::DS, "PixelSpacing"},
    entry{0x00280100, vr::US, "BitsAllocated"},
    entry{0x00280101, vr::US, "BitsStored"},
    entry{0x00280102, vr::US, "HighBit"},
    entry{0x00280103, vr::US, "PixelRepresentation"},
    entry{0x00281050, vr::DS, "WindowCenter"},
    entry{0x00281051, vr::DS, "WindowWidth"},
    entry{0x00281052, vr::DS, "RescaleIntercept"},
    entry{0x00281053, vr::DS, "RescaleSlope"},
    entry{0x00281054, vr::LO, "RescaleType"},
    entry{0x00282110, vr::CS, "LossyImageCompression"},
    entry{0x00321032, vr::PN, "RequestingPhysician"},
    entry{0x00321060, vr::LO, "RequestedProcedureDescription"},
    entry{0x00324000, vr::LT, "StudyComments"},
    entry{0x00380010, vr::LO, "AdmissionID"},
    entry{0x00400006, vr::PN, "ScheduledPerformingPhysicianName"},
    entry{0x00400244, vr::DA, "PerformedProcedureStepStartDate"},
    entry{0x00400245, vr::TM, "PerformedProcedureStepStartTime"},
    entry{0x00400253, vr::SH, "PerformedProcedureStepID"},
    entry{0x00400254, vr::LO, "PerformedProcedureStepDescription"},
    entry{0x00400275, vr::SQ, "RequestAttributesSequence"},
    entry{0x00401001, vr::SH, "RequestedProcedureID"},
    entry{0x0040A075, vr::PN, "VerifyingObserverName"},
    entry{0x0040A123, vr::PN, "PersonName"},
    entry{0x0040A730, vr::SQ, "ContentSequence"},
    entry{0x7FE00010, vr::OW, "PixelData"},
};

constexpr bool sorted_unique() {
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i - 1].key >= entries[i].key) return false;
    }
    return true;
}
static_assert(sorted_unique());

const entry* find_entry(tag t) noexcept {
    const auto key = t.combined();
    const auto it = std::lower_bound(entries.begin(), entries.end(), key,
                                     [](const entry& e, std::uint32_t k) { return e.key < k; });
    return it != entries.end() && it->key == key ? &*it : nullptr;
}

}  // namespace

std::optional<vr> lookup_vr(tag t) noexcept {
    if (t.is_private()) return std::nullopt;
    if (t.is_group_length()) return vr::UL;
    if (const auto* e = find_entry(t)) return e->value_representation;
    return std::nullopt;
}

std::string_view lookup_keyword(tag t) noexcept {
    if (const auto* e = find_entry(t)) return e->keyword;
    return {};
}

}  // namespace deid::dicom
