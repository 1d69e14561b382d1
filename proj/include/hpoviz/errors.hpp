#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hpoviz {

enum class ErrorCode {
  InvalidArgument,
  NotFound,
  EmptySelection,
  InsufficientData,
  Incompatible,
  Schema,
  Validation,
  UnknownFormat,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Base error for everything the library reports. `field` names the offending
/// parameter or record when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

[[noreturn]] void throw_invalid(const std::string& field, const std::string& message);
[[noreturn]] void throw_not_found(const std::string& what);
[[noreturn]] void throw_empty_selection(const std::string& message);
[[noreturn]] void throw_insufficient(const std::string& message);

}  // namespace hpoviz
