#pragma once

#include <stdexcept>
#include <string>

namespace bisp {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    Ok = 0,
    Usage = 1,
    Data = 2,
    Runtime = 3,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::Runtime; }
};

/// Bad configuration, unknown names, invalid weights, missing directories.
class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::Usage; }
};

/// Malformed or unusable input data on disk.
class DataError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::Data; }
};

/// Tensor shapes that do not satisfy an operation's contract.
class ShapeError : public Error {
public:
    using Error::Error;
};

} // namespace bisp
