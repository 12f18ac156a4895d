#pragma once

#include <stdexcept>
#include <string>

namespace elastic {

/// Invalid user-supplied parameter or configuration value.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke an operational contract (e.g. feedback for a pure-local frame).
class ProtocolViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Network or I/O failure in the live runtime.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace elastic
