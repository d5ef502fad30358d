#pragma once

#include <stdexcept>
#include <string>

namespace trapdet {

// Thrown when user-supplied values violate a documented precondition
// (bad geometry, out-of-range parameters, malformed config, ...).
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a numerical routine cannot produce a trustworthy result
// (singular system, no trap minimum found, iteration failure, ...).
struct solver_error : std::runtime_error {
    explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace trapdet
