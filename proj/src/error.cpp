#include "xpd/error.hpp"

#include <iostream>
#include <sstream>

namespace xpd {

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::EmptyDomain: return "EmptyDomain";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::InvalidMeasure: return "InvalidMeasure";
    case ErrorKind::EmptyFamily: return "EmptyFamily";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::DegenerateBond: return "DegenerateBond";
    case ErrorKind::NumericalBlowup: return "NumericalBlowup";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::Validation: return "ValidationError";
    case ErrorKind::UnknownPreset: return "UnknownPreset";
    case ErrorKind::Io: return "IoError";
    }
    return "Error";
}

namespace {

std::string join_problems(const std::vector<std::string>& problems)
{
    std::ostringstream out;
    out << problems.size() << " validation problem(s)";
    for (const auto& p : problems) out << "\n  - " << p;
    return out.str();
}

void stderr_sink(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

WarningSink g_sink = &stderr_sink;

} // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : Error(ErrorKind::Validation, join_problems(problems)), problems_(std::move(problems))
{
}

void warn(const std::string& message) { g_sink(message); }

WarningSink set_warning_sink(WarningSink sink)
{
    WarningSink old = g_sink;
    g_sink = sink ? sink : &stderr_sink;
    return old;
}

} // namespace xpd
