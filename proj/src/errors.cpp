#include "keysg/errors.hpp"

namespace keysg {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::BadPose: return "BadPose";
        case ErrorCode::BadIntrinsics: return "BadIntrinsics";
        case ErrorCode::EmptyScene: return "EmptyScene";
        case ErrorCode::NoFreeSpace: return "NoFreeSpace";
        case ErrorCode::EmptyRoom: return "EmptyRoom";
        case ErrorCode::EmptySegment: return "EmptySegment";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::ProviderError: return "ProviderError";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::ParseFailure: return "ParseFailure";
        case ErrorCode::InconsistentIds: return "InconsistentIds";
        case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorCode::CorruptSidecar: return "CorruptSidecar";
        case ErrorCode::UnknownId: return "UnknownId";
        case ErrorCode::EmptyStore: return "EmptyStore";
        case ErrorCode::MissingSummary: return "MissingSummary";
        case ErrorCode::EmptyGT: return "EmptyGT";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace keysg
