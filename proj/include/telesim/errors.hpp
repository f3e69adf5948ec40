#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace telesim {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (conditions, scenes, trial files).
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Caller supplied input that violates an operation's precondition.
class InputError : public Error {
  public:
    using Error::Error;
};

class JointLimitError : public InputError {
  public:
    using InputError::InputError;
};

class InvalidIntervalError : public InputError {
  public:
    using InputError::InputError;
};

/// Raised by the IK solver; carries the best residual it reached.
class ConvergenceError : public Error {
  public:
    ConvergenceError(const std::string& what, double position_residual,
                     double orientation_residual)
        : Error(what), position_residual_(position_residual),
          orientation_residual_(orientation_residual) {}

    double position_residual() const noexcept { return position_residual_; }
    double orientation_residual() const noexcept { return orientation_residual_; }

  private:
    double position_residual_;
    double orientation_residual_;
};

class MonotonicityError : public Error {
  public:
    using Error::Error;
};

class InfeasibleBufferError : public Error {
  public:
    using Error::Error;
};

class UnusableTraceError : public Error {
  public:
    using Error::Error;
};

class InsufficientBaselineError : public Error {
  public:
    using Error::Error;
};

class FormatVersionError : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    ParseError(const std::string& file, std::size_t line, const std::string& detail)
        : Error(file + ":" + std::to_string(line) + ": " + detail), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class IoError : public Error {
  public:
    IoError(const std::string& path, const std::string& detail)
        : Error(path + ": " + detail), path_(path) {}

    const std::string& path() const noexcept { return path_; }

  private:
    std::string path_;
};

class ProtocolError : public Error {
  public:
    ProtocolError(std::size_t offset, const std::string& detail)
        : Error("protocol error at byte " + std::to_string(offset) + ": " + detail),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

  private:
    std::size_t offset_;
};

} // namespace telesim
