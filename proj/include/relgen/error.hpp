#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace relgen {

enum class ErrorKind {
    io,                // missing/unreadable files, short reads
    parse,             // malformed input files (position-annotated where possible)
    invalid_argument,  // contract violations at an API boundary
    state,             // valid inputs that cannot be acted on (e.g. unreachable language)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::io, msg); }
[[noreturn]] inline void throw_parse(const std::string& msg) { throw Error(ErrorKind::parse, msg); }
[[noreturn]] inline void throw_invalid(const std::string& msg) { throw Error(ErrorKind::invalid_argument, msg); }
[[noreturn]] inline void throw_state(const std::string& msg) { throw Error(ErrorKind::state, msg); }

}  // namespace relgen
