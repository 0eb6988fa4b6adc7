#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pdca {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

    /// Domain errors are properties of the inputs (infeasible thresholds,
    /// missing coverage); everything else is a usage or internal failure.
    virtual bool is_domain_error() const noexcept { return false; }

private:
    std::string kind_;
};

class DomainError : public Error {
public:
    using Error::Error;
    bool is_domain_error() const noexcept override { return true; }
};

struct InvalidModel : Error {
    explicit InvalidModel(const std::string& m) : Error("InvalidModel", m) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& m) : Error("DimensionMismatch", m) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("ConfigError", m) {}
};

struct InternalError : Error {
    explicit InternalError(const std::string& m) : Error("InternalError", m) {}
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error("IoError", m) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& m, std::size_t line)
        : Error("ParseError", "line " + std::to_string(line) + ": " + m), line_(line) {}
    explicit ParseError(const std::string& m) : Error("ParseError", m), line_(0) {}

    /// 1-based line number, 0 when not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct CoverageViolation : DomainError {
    explicit CoverageViolation(const std::string& m) : DomainError("CoverageViolation", m) {}
};

struct Infeasible : DomainError {
    explicit Infeasible(const std::string& m) : DomainError("Infeasible", m) {}
};

struct EmptyDataset : DomainError {
    EmptyDataset() : DomainError("EmptyDataset", "dataset has no transitions") {}
};

struct NonFinite : DomainError {
    explicit NonFinite(const std::string& m) : DomainError("NonFinite", m) {}
};

struct RetryExhausted : DomainError {
    explicit RetryExhausted(const std::string& m) : DomainError("RetryExhausted", m) {}
};

}  // namespace pdca
