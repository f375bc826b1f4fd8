#pragma once

#include <stdexcept>
#include <string>

namespace switchctl {

/**
 * @brief Raised when a computation leaves its validity domain at runtime
 * (solution blowup, nonpositive data fed to a log-fit, ...).
 *
 * Argument/shape violations throw std::invalid_argument instead; this type is
 * reserved for failures that can only be detected while number-crunching.
 */
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace switchctl
