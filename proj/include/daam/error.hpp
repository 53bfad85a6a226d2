#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace daam {

enum class ErrorKind {
    MissingManifest,
    SchemaViolation,
    InvariantViolation,
    MissingSlice,
    ShapeMismatch,
    ValueRangeViolation,
    RowSumViolation,
    IoFailure,
    ShapeOverflow,
    EmptySelection,
    UnknownWord,
    DimMismatch,
    EmptyEvaluation,
    OutOfRange,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::MissingManifest: return "MissingManifest";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::MissingSlice: return "MissingSlice";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ValueRangeViolation: return "ValueRangeViolation";
    case ErrorKind::RowSumViolation: return "RowSumViolation";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::ShapeOverflow: return "ShapeOverflow";
    case ErrorKind::EmptySelection: return "EmptySelection";
    case ErrorKind::UnknownWord: return "UnknownWord";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorKind::OutOfRange: return "OutOfRange";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the typed kinds above;
/// what() is "<Kind>: <detail>".
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace daam
