#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sheetaudit {

enum class ErrorCode {
    MalformedAddress,
    MalformedWorkbook,
    MultipleSheets,
    ParseError,
    OutOfGrid,
    LevelMismatch,
    TooFewUnits,
    CyclicDDG,
    NotASink,
    NotRestorable,
    UnknownModule,
    NotAModuleVertex,
    SheetMismatch,
    InvalidParameters,
    UnknownSession,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedAddress: return "MalformedAddress";
    case ErrorCode::MalformedWorkbook: return "MalformedWorkbook";
    case ErrorCode::MultipleSheets: return "MultipleSheets";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::OutOfGrid: return "OutOfGrid";
    case ErrorCode::LevelMismatch: return "LevelMismatch";
    case ErrorCode::TooFewUnits: return "TooFewUnits";
    case ErrorCode::CyclicDDG: return "CyclicDDG";
    case ErrorCode::NotASink: return "NotASink";
    case ErrorCode::NotRestorable: return "NotRestorable";
    case ErrorCode::UnknownModule: return "UnknownModule";
    case ErrorCode::NotAModuleVertex: return "NotAModuleVertex";
    case ErrorCode::SheetMismatch: return "SheetMismatch";
    case ErrorCode::InvalidParameters: return "InvalidParameters";
    case ErrorCode::UnknownSession: return "UnknownSession";
    }
    return "Unknown";
}

/// Every failure raised by the library. `details` carries per-item messages
/// when several problems are reported at once (e.g. all unparsable cells).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::vector<std::string> details = {})
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          details_(std::move(details)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    ErrorCode code_;
    std::vector<std::string> details_;
};

} // namespace sheetaudit
