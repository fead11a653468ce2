#pragma once

#include <stdexcept>
#include <string>

namespace jenseff {

// Error taxonomy. invalid-argument conditions use std::invalid_argument directly;
// everything else gets a distinct type so callers can catch selectively
// (e.g. fsim catches OutOfDomainError to apply its clamp policy).

struct OutOfDomainError : std::runtime_error {
    explicit OutOfDomainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IllConditionedError : std::runtime_error {
    explicit IllConditionedError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateSmootherError : std::runtime_error {
    explicit DegenerateSmootherError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateDataError : std::runtime_error {
    explicit DegenerateDataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateFunctionalError : std::runtime_error {
    explicit DegenerateFunctionalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidCorrelationError : std::runtime_error {
    explicit InvalidCorrelationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SurfaceInvalidError : std::runtime_error {
    explicit SurfaceInvalidError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyDatasetError : std::runtime_error {
    explicit EmptyDatasetError(const std::string& msg) : std::runtime_error(msg) {}
};

struct OutOfSupportError : std::runtime_error {
    explicit OutOfSupportError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace jenseff
