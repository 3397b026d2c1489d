#pragma once

#include <stdexcept>
#include <string>

namespace visvar {

// Exit codes used by the CLI. Anything else maps to 1.
enum class ExitCode : int {
    ok = 0,
    failure = 1,
    config_error = 2,
    backend_exhausted = 3,
    store_corruption = 4,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg, ExitCode code = ExitCode::failure)
        : std::runtime_error(msg), code_(code) {}
    ExitCode exit_code() const { return code_; }

private:
    ExitCode code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg, ExitCode::config_error) {}
};

// A record failed a type invariant; the message names the invariant.
class InvariantError : public Error {
public:
    InvariantError(const std::string& invariant, const std::string& detail)
        : Error(invariant + ": " + detail), invariant_(invariant) {}
    const std::string& invariant() const { return invariant_; }

private:
    std::string invariant_;
};

class StoreError : public Error {
public:
    explicit StoreError(const std::string& msg, ExitCode code = ExitCode::store_corruption)
        : Error(msg, code) {}
};

// Caller passed arguments that violate an operation precondition.
class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& msg) : Error(msg) {}
};

// A backend call failed after exhausting its retry budget, or returned
// something the client cannot use.
class TaskFailure : public Error {
public:
    explicit TaskFailure(const std::string& msg) : Error(msg, ExitCode::backend_exhausted) {}
};

}  // namespace visvar
