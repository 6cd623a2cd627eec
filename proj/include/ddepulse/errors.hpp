#pragma once

#include <stdexcept>
#include <string>

namespace ddepulse {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raw parameters do not satisfy b_L > gamma*theta > b_U, so the reduced
// model has no oscillatory limit cycle.
struct NonOscillatoryRegime : Error {
    explicit NonOscillatoryRegime(const std::string& msg) : Error(msg) {}
};

// Evaluation time outside the domain of the object being queried.
struct OutOfRange : Error {
    explicit OutOfRange(const std::string& msg) : Error(msg) {}
};

// Pathological event chatter: too many breaking points merged at the
// minimum spacing (guards against a runaway event loop).
struct EventStall : Error {
    explicit EventStall(const std::string& msg) : Error(msg) {}
};

// Pulse onset coincides with the phase that traps the solution on the
// rapidly oscillating unstable cycle; the resetting time is infinite.
struct InfiniteResetting : Error {
    explicit InfiniteResetting(const std::string& msg) : Error(msg) {}
};

// Forcing amplitude below the a1 threshold: the closed-form forced cycle
// is not guaranteed, callers must simulate instead.
struct BelowThreshold : Error {
    explicit BelowThreshold(const std::string& msg) : Error(msg) {}
};

// A dosing request that no admissible parameter value can satisfy.
struct Infeasible : Error {
    explicit Infeasible(const std::string& msg) : Error(msg) {}
};

// Iterative solver exhausted its iteration budget.
struct NoConvergence : Error {
    explicit NoConvergence(const std::string& msg) : Error(msg) {}
};

// Asked for a quantity whose defining condition fails (e.g. the rapid
// cycle constants when the amplitude is too small).
struct Undefined : Error {
    explicit Undefined(const std::string& msg) : Error(msg) {}
};

}  // namespace ddepulse
