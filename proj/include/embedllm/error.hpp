#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace embedllm {

/// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number of the offending row.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateError : public Error {
    using Error::Error;
};

/// Argument outside the domain of an operation (bad label, empty set, length mismatch).
class DomainError : public Error {
    using Error::Error;
};

class ConfigError : public Error {
    using Error::Error;
};

/// A model lacks the records an operation needs.
class CoverageError : public Error {
    using Error::Error;
};

class NumericError : public Error {
    using Error::Error;
};

class TrainingError : public Error {
public:
    TrainingError(std::size_t epoch, const std::string& what)
        : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

class UndefinedTauError : public Error {
    using Error::Error;
};

class SplitError : public Error {
    using Error::Error;
};

class CommunityError : public Error {
    using Error::Error;
};

}  // namespace embedllm
