#include "harmlens/error.hpp"

namespace harmlens {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDatasetNotFound: return "DatasetNotFound";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kInvalidFraction: return "InvalidFraction";
    case ErrorCode::kEmptyProfile: return "EmptyProfile";
    case ErrorCode::kUnknownEntity: return "UnknownEntity";
    case ErrorCode::kInvalidSmoothing: return "InvalidSmoothing";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kInvalidTreatment: return "InvalidTreatment";
    case ErrorCode::kNoMatch: return "NoMatch";
    case ErrorCode::kInvalidShift: return "InvalidShift";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSnapshotCorrupt: return "SnapshotCorrupt";
  }
  return "Unknown";
}

}  // namespace harmlens
