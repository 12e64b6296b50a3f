#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sepsearch {

enum class ErrorCode {
    BadMagic,
    CorruptHeader,
    NonFiniteValue,
    DuplicateId,
    IoFailure,
    ParseError,
    DuplicatePair,
    UnknownId,
    ReferentialMismatch,
    DimMismatch,
    BadShape,
    NonFinite,
    ShapeMismatch,
    NoPositives,
    DivergedLoss,
    BadParams,
    NoRelevant,
    EmptyRun,
    BadSpec,
    UsageError,
};

std::string_view error_name(ErrorCode code);

/// Typed domain error. `name()` is the stable identifier the CLI prints.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    std::string_view name() const noexcept { return error_name(code_); }

  private:
    ErrorCode code_;
};

} // namespace sepsearch
