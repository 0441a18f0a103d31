#pragma once

#include <stdexcept>
#include <string>

namespace rlihf {

// Invalid configuration value or file (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke an operation's precondition.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Model fitting could not proceed (e.g. a single-class training set).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rlihf
