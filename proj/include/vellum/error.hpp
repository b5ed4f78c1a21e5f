#pragma once

#include <stdexcept>
#include <string>

namespace vellum {

enum class ErrorKind {
    InvalidInput,
    MalformedAnnotation,
    DegenerateResult,
    InfeasibleDomain,
    NumericalFailure,
    IllPosed,
    Io,
};

const char* to_string(ErrorKind kind);

/// Base of every error raised by the library. `kind()` drives CLI exit codes
/// and HTTP status mapping.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& what) : Error(ErrorKind::InvalidInput, what) {}
};

class MalformedAnnotation : public Error {
public:
    MalformedAnnotation(int x, int y, const std::string& what)
        : Error(ErrorKind::MalformedAnnotation, what), x_(x), y_(y) {}

    int x() const noexcept { return x_; }
    int y() const noexcept { return y_; }

private:
    int x_;
    int y_;
};

class DegenerateResult : public Error {
public:
    DegenerateResult(int iterations, const std::string& what)
        : Error(ErrorKind::DegenerateResult, what), iterations_(iterations) {}

    int iterations() const noexcept { return iterations_; }

private:
    int iterations_;
};

class InfeasibleDomain : public Error {
public:
    explicit InfeasibleDomain(const std::string& what) : Error(ErrorKind::InfeasibleDomain, what) {}
};

class NumericalFailure : public Error {
public:
    NumericalFailure(double residual, const std::string& what)
        : Error(ErrorKind::NumericalFailure, what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class IllPosed : public Error {
public:
    explicit IllPosed(const std::string& what) : Error(ErrorKind::IllPosed, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

} // namespace vellum
