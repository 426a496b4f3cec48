#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace harmlens {

enum class ErrorCode {
  kDatasetNotFound,
  kParseError,
  kEmptyDataset,
  kInvalidFraction,
  kEmptyProfile,
  kUnknownEntity,
  kInvalidSmoothing,
  kInsufficientData,
  kInvalidK,
  kInvalidTreatment,
  kNoMatch,
  kInvalidShift,
  kInvalidArgument,
  kSnapshotCorrupt,
};

std::string_view to_string(ErrorCode code);

/// Base error for every failure raised by the library. The code identifies
/// the failure class; the message is human readable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed input line. Carries the file it came from and a 1-based line.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(ErrorCode::kParseError,
              file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace harmlens
