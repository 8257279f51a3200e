#include "cxrsynth/error.hpp"

namespace cxrsynth {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyCatalog: return "EmptyCatalog";
    case ErrorCode::AllZero: return "AllZero";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::CapacityExhausted: return "CapacityExhausted";
    case ErrorCode::CapViolation: return "CapViolation";
    case ErrorCode::TemplateMissingPlaceholder: return "TemplateMissingPlaceholder";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ProviderRejectedPrompt: return "ProviderRejectedPrompt";
    case ErrorCode::NonBooleanAnswer: return "NonBooleanAnswer";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RetriesExhausted: return "RetriesExhausted";
    case ErrorCode::DuplicateRecordId: return "DuplicateRecordId";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    }
    return "Unknown";
}

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::ConfigMismatch:
    case ErrorCode::MalformedRecord:
    case ErrorCode::EmptyCatalog:
    case ErrorCode::TemplateMissingPlaceholder:
    case ErrorCode::PreconditionViolation:
        return 2;
    case ErrorCode::CapacityExhausted:
    case ErrorCode::CapViolation:
        return 3;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::Timeout:
    case ErrorCode::ProviderRejectedPrompt:
    case ErrorCode::NonBooleanAnswer:
    case ErrorCode::DimensionMismatch:
        return 4;
    case ErrorCode::RetriesExhausted:
        return 5;
    case ErrorCode::DuplicateRecordId:
    case ErrorCode::StorageFailure:
    case ErrorCode::CorruptCheckpoint:
        return 6;
    case ErrorCode::AllZero:
        return 1;
    }
    return 1;
}

} // namespace cxrsynth
