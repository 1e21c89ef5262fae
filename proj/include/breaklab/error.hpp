#pragma once

#include <stdexcept>
#include <string>

namespace breaklab {

enum class ErrorKind {
    invalid_argument,
    budget_exceeded,
    rational_rotation,
    mode_locking,
    precision_exhausted,
    rotation_mismatch,
    coinciding_jumps,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::budget_exceeded: return "budget_exceeded";
    case ErrorKind::rational_rotation: return "rational_rotation";
    case ErrorKind::mode_locking: return "mode_locking";
    case ErrorKind::precision_exhausted: return "precision_exhausted";
    case ErrorKind::rotation_mismatch: return "rotation_mismatch";
    case ErrorKind::coinciding_jumps: return "coinciding_jumps";
    }
    return "unknown";
}

/// All library failures. `kind` drives the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::invalid_argument, what);
}

} // namespace breaklab
