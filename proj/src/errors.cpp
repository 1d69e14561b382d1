#include "hpoviz/errors.hpp"

namespace hpoviz {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::EmptySelection: return "empty_selection";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::Incompatible: return "incompatible";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::UnknownFormat: return "unknown_format";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

void throw_invalid(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::InvalidArgument, message, field);
}

void throw_not_found(const std::string& what) {
  throw Error(ErrorCode::NotFound, what + " not found");
}

void throw_empty_selection(const std::string& message) {
  throw Error(ErrorCode::EmptySelection, "EmptySelection: " + message);
}

void throw_insufficient(const std::string& message) {
  throw Error(ErrorCode::InsufficientData, "InsufficientData: " + message);
}

}  // namespace hpoviz
