#pragma once

#include <stdexcept>
#include <string>

namespace imtriage {

enum class ErrorCode {
    InvalidInput = 1,
    Parse,
    NotFound,
    Precondition,
    Optimizer,
    Cancelled,
    Io,
    Conflict,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised while reading text formats; `line` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

[[noreturn]] void throw_invalid(const std::string& message);
[[noreturn]] void throw_not_found(const std::string& message);
[[noreturn]] void throw_precondition(const std::string& message);

} // namespace imtriage
