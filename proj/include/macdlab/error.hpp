#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace macdlab {

enum class Errc {
  InvalidArgument,
  MalformedHeader,
  MalformedRow,
  EmptySeries,
  DuplicateDate,
  InvertedRange,
  InvalidUniverse,
  NetworkFailure,
  ProviderRejection,
  WindowTooLarge,
  NonPositiveMiddle,
  ZeroVolumeWindow,
  SeriesTooShort,
  MisalignedSeries,
  InfeasibleRanges,
  InvalidConfig,
  HashMismatch,
  Io,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::DuplicateDate: return "DuplicateDate";
    case Errc::InvertedRange: return "InvertedRange";
    case Errc::InvalidUniverse: return "InvalidUniverse";
    case Errc::NetworkFailure: return "NetworkFailure";
    case Errc::ProviderRejection: return "ProviderRejection";
    case Errc::WindowTooLarge: return "WindowTooLarge";
    case Errc::NonPositiveMiddle: return "NonPositiveMiddle";
    case Errc::ZeroVolumeWindow: return "ZeroVolumeWindow";
    case Errc::SeriesTooShort: return "SeriesTooShort";
    case Errc::MisalignedSeries: return "MisalignedSeries";
    case Errc::InfeasibleRanges: return "InfeasibleRanges";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::HashMismatch: return "HashMismatch";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library. `code()` identifies the contract
/// that was violated; `line()` is set for row-level CSV errors.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), line_(line) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
};

}  // namespace macdlab
