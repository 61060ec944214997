#pragma once

#include <stdexcept>
#include <string>

namespace ngmpc {

// A numerical routine failed to reach its declared accuracy.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inconsistent or incomplete configuration (bad parameters, table caps too low).
class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violation of the distributed planning protocol (missing or misaligned plans).
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ngmpc
