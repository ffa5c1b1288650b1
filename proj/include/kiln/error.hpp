#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kiln {

enum class ErrorCode {
  DegenerateEdge,
  BadMagic,
  TruncatedFile,
  UnsupportedVersion,
  DimensionMismatch,
  MissingSidecar,
  BandCountMismatch,
  EmptyStack,
  DegenerateHistogram,
  MissingHeightGrid,
  MissingColumn,
  NonNumericCell,
  DuplicateId,
  SinglePoint,
  ShapeMismatch,
  EmptySegment,
  EmptyMask,
  NumericalError,
  MissingClass,
  NonFiniteLoss,
  LengthMismatch,
  PlacementFailure,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the toolkit carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::DegenerateEdge: return "DegenerateEdge";
  case ErrorCode::BadMagic: return "BadMagic";
  case ErrorCode::TruncatedFile: return "TruncatedFile";
  case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
  case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  case ErrorCode::MissingSidecar: return "MissingSidecar";
  case ErrorCode::BandCountMismatch: return "BandCountMismatch";
  case ErrorCode::EmptyStack: return "EmptyStack";
  case ErrorCode::DegenerateHistogram: return "DegenerateHistogram";
  case ErrorCode::MissingHeightGrid: return "MissingHeightGrid";
  case ErrorCode::MissingColumn: return "MissingColumn";
  case ErrorCode::NonNumericCell: return "NonNumericCell";
  case ErrorCode::DuplicateId: return "DuplicateId";
  case ErrorCode::SinglePoint: return "SinglePoint";
  case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  case ErrorCode::EmptySegment: return "EmptySegment";
  case ErrorCode::EmptyMask: return "EmptyMask";
  case ErrorCode::NumericalError: return "NumericalError";
  case ErrorCode::MissingClass: return "MissingClass";
  case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
  case ErrorCode::LengthMismatch: return "LengthMismatch";
  case ErrorCode::PlacementFailure: return "PlacementFailure";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

} // namespace kiln
