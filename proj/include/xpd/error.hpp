#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace xpd {

/// Categories surfaced to the CLI as distinct exit codes.
enum class ErrorKind {
    EmptyDomain,
    Parse,
    InvalidMeasure,
    EmptyFamily,
    SingularSystem,
    DegenerateBond,
    NumericalBlowup,
    NotConverged,
    Validation,
    UnknownPreset,
    Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SingularSystem : public Error {
public:
    explicit SingularSystem(const std::string& what) : Error(ErrorKind::SingularSystem, what) {}
};

class NumericalBlowup : public Error {
public:
    NumericalBlowup(std::size_t step, const std::string& what)
        : Error(ErrorKind::NumericalBlowup, "step " + std::to_string(step) + ": " + what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class NotConverged : public Error {
public:
    NotConverged(std::vector<double> history, const std::string& what)
        : Error(ErrorKind::NotConverged, what), history_(std::move(history)) {}
    const std::vector<double>& residual_history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Warnings go to stderr unless a test installs a sink.
void warn(const std::string& message);
using WarningSink = void (*)(const std::string&);
WarningSink set_warning_sink(WarningSink sink);

} // namespace xpd
