#pragma once

#include <stdexcept>
#include <string>

namespace df {

// Failure signals that callers are expected to distinguish by type.

struct ContourDegenerate : std::runtime_error {
    explicit ContourDegenerate(const std::string& what) : std::runtime_error(what) {}
};

struct TuningFailure : std::runtime_error {
    explicit TuningFailure(const std::string& what) : std::runtime_error(what) {}
};

struct NonvanishingViolated : std::runtime_error {
    explicit NonvanishingViolated(const std::string& what) : std::runtime_error(what) {}
};

struct NotInConvergentRegion : std::runtime_error {
    explicit NotInConvergentRegion(const std::string& what) : std::runtime_error(what) {}
};

struct PrefactorNearZero : std::runtime_error {
    explicit PrefactorNearZero(const std::string& what) : std::runtime_error(what) {}
};

struct HintViolation : std::runtime_error {
    explicit HintViolation(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace df
