#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cxrsynth {

enum class ErrorCode {
    MalformedRecord,
    EmptyCatalog,
    AllZero,
    ConfigInvalid,
    PreconditionViolation,
    CapacityExhausted,
    CapViolation,
    TemplateMissingPlaceholder,
    ProviderUnavailable,
    Timeout,
    ProviderRejectedPrompt,
    NonBooleanAnswer,
    DimensionMismatch,
    RetriesExhausted,
    DuplicateRecordId,
    StorageFailure,
    ConfigMismatch,
    CorruptCheckpoint,
};

std::string_view to_string(ErrorCode code);

// Process exit status for a failure class: 2 config, 3 capacity, 4 provider,
// 5 retries exhausted, 6 storage. Anything else maps to 1.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// A verify-or-regenerate loop hit its attempt cap.
class RetriesExhausted : public Error {
public:
    RetriesExhausted(std::string stage, unsigned attempts, const std::string& detail)
        : Error(ErrorCode::RetriesExhausted, stage + " failed verification " + std::to_string(attempts) + " times" +
                                                 (detail.empty() ? "" : ": " + detail)),
          stage_(std::move(stage)), attempts_(attempts) {}

    const std::string& stage() const noexcept { return stage_; }
    unsigned attempts() const noexcept { return attempts_; }

private:
    std::string stage_;
    unsigned attempts_;
};

} // namespace cxrsynth
