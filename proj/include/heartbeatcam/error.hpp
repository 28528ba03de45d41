#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace heartbeatcam {

/// Base for every error the library throws. Callers that need to map errors to
/// exit codes or HTTP statuses switch on the concrete type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input was well-formed but violates a domain rule (range, template field, ...).
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Input could not be parsed. `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::string field, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line),
          field_(std::move(field)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

class NotEnoughData : public Error {
public:
    NotEnoughData(std::size_t count, std::size_t min_samples)
        : Error("not enough data: " + std::to_string(count) + " readings, need " +
                std::to_string(min_samples)),
          count_(count),
          min_samples_(min_samples) {}

    std::size_t count() const noexcept { return count_; }
    std::size_t min_samples() const noexcept { return min_samples_; }

private:
    std::size_t count_;
    std::size_t min_samples_;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class Conflict : public Error {
public:
    using Error::Error;
};

/// Operation is not permitted in the current state (past scheduling, ...).
class StateError : public Error {
public:
    using Error::Error;
};

}  // namespace heartbeatcam
