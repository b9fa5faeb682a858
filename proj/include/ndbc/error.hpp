#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace ndbc {

enum class ErrorCode {
    InvalidArgument,
    BadSpacing,
    NoStripNodes,
    EmptyInterior,
    SingularAtOrigin,
    EmptySupport,
    SingularSystem,
    NoConvergence,
    NonConvexExponent,
    NoContraction,
    SingularInterior,
    TooFewStripNodes,
    NotMeanZero,
    ConstantField,
    EmptyBump,
    NonPositiveData,
    WindowTooSmall,
    EmptySeries,
    ConfigInvalid,
    Io,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::BadSpacing: return "BadSpacing";
        case ErrorCode::NoStripNodes: return "NoStripNodes";
        case ErrorCode::EmptyInterior: return "EmptyInterior";
        case ErrorCode::SingularAtOrigin: return "SingularAtOrigin";
        case ErrorCode::EmptySupport: return "EmptySupport";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::NonConvexExponent: return "NonConvexExponent";
        case ErrorCode::NoContraction: return "NoContraction";
        case ErrorCode::SingularInterior: return "SingularInterior";
        case ErrorCode::TooFewStripNodes: return "TooFewStripNodes";
        case ErrorCode::NotMeanZero: return "NotMeanZero";
        case ErrorCode::ConstantField: return "ConstantField";
        case ErrorCode::EmptyBump: return "EmptyBump";
        case ErrorCode::NonPositiveData: return "NonPositiveData";
        case ErrorCode::WindowTooSmall: return "WindowTooSmall";
        case ErrorCode::EmptySeries: return "EmptySeries";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Base exception for every failure raised by the library. The code is the
/// machine-readable category; what() carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Iterative solver gave up; the best iterate found so far is attached.
class NoConvergenceError : public Error {
public:
    NoConvergenceError(const std::string& detail, Eigen::VectorXd best, int iterations)
        : Error(ErrorCode::NoConvergence, detail), best_(std::move(best)), iterations_(iterations) {}

    const Eigen::VectorXd& best_iterate() const noexcept { return best_; }
    int iterations() const noexcept { return iterations_; }

private:
    Eigen::VectorXd best_;
    int iterations_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
    throw Error(code, detail);
}

inline void require(bool condition, ErrorCode code, const std::string& detail) {
    if (!condition) {
        fail(code, detail);
    }
}

}  // namespace ndbc
