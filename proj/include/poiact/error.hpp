#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace poiact {

enum class ErrorCode {
  // taxonomy
  kParse,
  kUnsupportedVersion,
  kDanglingReference,
  kCycleDetected,
  kDuplicateId,
  kMissingSchedule,
  kMissingRule,
  kInvalidMembership,
  kUnknownPoiType,
  kUnknownActivity,
  kUnknownTimeClass,
  kUnknownDayClass,
  // osm-ingest
  kMalformedXml,
  kIo,
  // grid
  kDegenerateBbox,
  kOutOfBounds,
  kBadSnapshot,
  // likelihood
  kDegenerateTimeClass,
  kEmptyCandidateSet,
  kNoOverlap,
  // evaluation
  kUnknownCategory,
  kMalformedRow,
  kEmptyScope,
  kMissingCityMass,
  kUnnormalizedInput,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every module reports contract violations through this one exception type;
/// `code()` lets callers (CLI exit codes, HTTP status mapping) branch on kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kDanglingReference: return "DanglingReference";
    case ErrorCode::kCycleDetected: return "CycleDetected";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kMissingSchedule: return "MissingSchedule";
    case ErrorCode::kMissingRule: return "MissingRule";
    case ErrorCode::kInvalidMembership: return "InvalidMembership";
    case ErrorCode::kUnknownPoiType: return "UnknownPoiType";
    case ErrorCode::kUnknownActivity: return "UnknownActivity";
    case ErrorCode::kUnknownTimeClass: return "UnknownTimeClass";
    case ErrorCode::kUnknownDayClass: return "UnknownDayClass";
    case ErrorCode::kMalformedXml: return "MalformedXml";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kDegenerateBbox: return "DegenerateBbox";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kBadSnapshot: return "BadSnapshot";
    case ErrorCode::kDegenerateTimeClass: return "DegenerateTimeClass";
    case ErrorCode::kEmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorCode::kNoOverlap: return "NoOverlap";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kEmptyScope: return "EmptyScope";
    case ErrorCode::kMissingCityMass: return "MissingCityMass";
    case ErrorCode::kUnnormalizedInput: return "UnnormalizedInput";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

}  // namespace poiact
