#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace posseq {

enum class ErrorKind {
    InvalidArgument,
    InvalidLayout,
    InvalidTrajectory,
    AllAttractionsZero,
    UnknownElement,
    ZeroDistance,
    InvalidFuzzifier,
    RegionViolation,
    UnknownSymbol,
    EmptySequence,
    EmptyTrainingSet,
    LengthMismatch,
    DegenerateCorpus,
    InvalidModel,
    Format,
    Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidLayout: return "InvalidLayout";
    case ErrorKind::InvalidTrajectory: return "InvalidTrajectory";
    case ErrorKind::AllAttractionsZero: return "AllAttractionsZero";
    case ErrorKind::UnknownElement: return "UnknownElement";
    case ErrorKind::ZeroDistance: return "ZeroDistance";
    case ErrorKind::InvalidFuzzifier: return "InvalidFuzzifier";
    case ErrorKind::RegionViolation: return "RegionViolation";
    case ErrorKind::UnknownSymbol: return "UnknownSymbol";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DegenerateCorpus: return "DegenerateCorpus";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::Format: return "Format";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a kind so callers (and tests)
/// can dispatch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

} // namespace posseq
