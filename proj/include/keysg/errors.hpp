#pragma once

#include <stdexcept>
#include <string>

namespace keysg {

enum class ErrorCode {
    MissingFile,
    BadPose,
    BadIntrinsics,
    EmptyScene,
    NoFreeSpace,
    EmptyRoom,
    EmptySegment,
    EmptyMask,
    ProviderError,
    Timeout,
    ParseFailure,
    InconsistentIds,
    SchemaVersionMismatch,
    CorruptSidecar,
    UnknownId,
    EmptyStore,
    MissingSummary,
    EmptyGT,
    SchemaError,
    InvalidArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Provider failures carry enough context for retry decisions.
class ProviderError : public Error {
public:
    ProviderError(int status, bool retryable, const std::string& message)
        : Error(ErrorCode::ProviderError, message), status_(status), retryable_(retryable) {}

    int status() const { return status_; }
    bool retryable() const { return retryable_; }

private:
    int status_;
    bool retryable_;
};

}  // namespace keysg
