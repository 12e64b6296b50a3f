#include "sepsearch/error.hpp"

namespace sepsearch {

std::string_view error_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicatePair: return "DuplicatePair";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::ReferentialMismatch: return "ReferentialMismatch";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::NoRelevant: return "NoRelevant";
    case ErrorCode::EmptyRun: return "EmptyRun";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::UsageError: return "UsageError";
    }
    return "Unknown";
}

} // namespace sepsearch
