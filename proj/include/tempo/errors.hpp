#pragma once

#include <stdexcept>
#include <string>

namespace tempo {

// Base class for every error the simulation layer raises on purpose.
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

// Bad user-facing configuration: scale out of range, thread count beyond the
// topology's capacity, unknown enum string, and the like.
class ConfigError : public SimError {
public:
    using SimError::SimError;
};

// A model scheduled an event into the past, or (conservative engine) closer
// than the declared lookahead.
class CausalityError : public SimError {
public:
    using SimError::SimError;
};

// An insert below the reclaimed (fossil-collected) horizon of the shared pool.
class StaleInsertError : public SimError {
public:
    using SimError::SimError;
};

// An event record handed to a structure that does not own it (e.g. inserting
// into another object's calendar).
class DestinationMismatchError : public SimError {
public:
    using SimError::SimError;
};

// The requested run exceeds the target machine's capacity (thread
// oversubscription) or a result file cannot be written.
class CapacityIoError : public SimError {
public:
    using SimError::SimError;
};

// Internal invariant broken; indicates a bug, not a user mistake.
class ConsistencyError : public std::logic_error {
public:
    explicit ConsistencyError(const std::string& what) : std::logic_error(what) {}
};

} // namespace tempo
