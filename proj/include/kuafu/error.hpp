#pragma once

#include <stdexcept>
#include <string>

namespace kuafu {

// Bad input: malformed files, invalid flags, violated preconditions.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Parse failure in a user-supplied file; carries a 1-based line number.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line)
        : ValidationError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

// Failure while executing an otherwise valid request (I/O, internal state).
// The CLI maps this to exit code 2.
class RuntimeError : public std::runtime_error {
public:
    explicit RuntimeError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace kuafu
