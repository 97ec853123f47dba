#include "imtriage/error.hpp"

namespace imtriage {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidInput: return "invalid_input";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::Optimizer: return "optimizer_error";
    case ErrorCode::Cancelled: return "cancelled";
    case ErrorCode::Io: return "io_error";
    case ErrorCode::Conflict: return "conflict";
    }
    return "unknown";
}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(ErrorCode::Parse, "line " + std::to_string(line) + ": " + message), line_(line) {}

void throw_invalid(const std::string& message) { throw Error(ErrorCode::InvalidInput, message); }
void throw_not_found(const std::string& message) { throw Error(ErrorCode::NotFound, message); }
void throw_precondition(const std::string& message) { throw Error(ErrorCode::Precondition, message); }

} // namespace imtriage
