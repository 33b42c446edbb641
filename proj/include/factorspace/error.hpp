#pragma once

#include <stdexcept>
#include <string>

namespace factorspace {

// Process exit codes used by the command-line tool.
enum class ExitCode : int { ok = 0, config = 1, data = 2, numerical = 3 };

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// Invalid configuration or violated precondition on caller-supplied parameters.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

// Malformed or inconsistent input data.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

// Divergence, non-finite values, failed factorizations.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ExitCode::numerical, what) {}
};

}  // namespace factorspace
