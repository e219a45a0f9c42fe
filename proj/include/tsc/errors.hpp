#pragma once

#include <stdexcept>
#include <string>

namespace tsc {

// Error taxonomy for the lab. Every message names the offending field or
// quantity so harness output can point at the config line that caused it.

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct OverlapError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StepError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExtinctionDuringSampling : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a stationarity/stability gate fails; the harness maps it to a
// nonzero exit code distinct from config errors.
struct GateFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tsc
