#pragma once

#include <stdexcept>
#include <string>

namespace sinktail {

// Thrown when an active row or column has no active edge, so a unit-target
// half-step would be -log(0).
struct InfeasibleSupport : std::runtime_error {
    explicit InfeasibleSupport(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidTemperature : std::runtime_error {
    explicit InvalidTemperature(const std::string& what) : std::runtime_error(what) {}
};

// Requested a fixed-depth fast path with a trace of a different tail depth.
struct UnsupportedDepth : std::runtime_error {
    explicit UnsupportedDepth(const std::string& what) : std::runtime_error(what) {}
};

struct MissingBaseTrace : std::runtime_error {
    explicit MissingBaseTrace(const std::string& what) : std::runtime_error(what) {}
};

// Certificate is support-local; blocks with masked holes are out of scope.
struct NotApplicable : std::runtime_error {
    explicit NotApplicable(const std::string& what) : std::runtime_error(what) {}
};

// Orbit reconstruction across epsilon-continuation stages is undefined.
struct StageMismatch : std::runtime_error {
    explicit StageMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct SizeCapExceeded : std::runtime_error {
    explicit SizeCapExceeded(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sinktail
