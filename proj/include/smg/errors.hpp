#pragma once

#include <stdexcept>
#include <string>

namespace smg {

// Base class for all toolkit errors so callers can catch the whole family.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct InvalidCellSize : Error {
    using Error::Error;
};

struct InvalidSigma : Error {
    using Error::Error;
};

// Target query matched no object (rule-based locator).
struct NoMatch : Error {
    using Error::Error;
};

// Transport-level LLM failure (timeouts, HTTP errors, exhausted retries).
struct LlmFailure : Error {
    using Error::Error;
};

// No usable JSON could be extracted from an LLM reply.
struct ParseFailure : Error {
    using Error::Error;
};

// LLM-provided guidance referenced coordinates outside the scene grid.
struct BoundsViolation : Error {
    using Error::Error;
};

// No free path from the start cell to the target vicinity.
struct Unreachable : Error {
    using Error::Error;
};

// Instruction keyword not present in the rule-based action table.
struct UnknownAction : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace smg
