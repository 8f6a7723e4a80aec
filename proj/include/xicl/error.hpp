#pragma once

#include <stdexcept>
#include <string>

namespace xicl {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
    ok = 0,
    usage = 1,
    data = 2,
    gateway = 3,
    floor = 4,  // a report cell fell below a configured --min-accuracy / --min-f1
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept = 0;
};

/// Bad flags, bad enum spellings, missing required options.
class UsageError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

/// Malformed input files, violated dataset invariants, mismatched indices.
class DataError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

/// Failure talking to a completion backend. `status()` is the HTTP status
/// when one was received, 0 for transport failures.
class GatewayError : public Error {
public:
    explicit GatewayError(const std::string& what, int status = 0, bool retryable = false)
        : Error(what), status_(status), retryable_(retryable) {}

    ExitCode exit_code() const noexcept override { return ExitCode::gateway; }
    int status() const noexcept { return status_; }
    bool retryable() const noexcept { return retryable_; }

private:
    int status_;
    bool retryable_;
};

}  // namespace xicl
