#pragma once

#include <stdexcept>
#include <string>

namespace ceca {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument to a constructor or operation (agent count, round index, shapes).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// The requested port model cannot run on this agent count (1-port with odd n).
class ModelError : public Error {
public:
    using Error::Error;
};

/// A communication matrix failed its structural invariants.
class TopologyError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or a run that blew up.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// An iterative method hit its cap; carries the last estimate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_estimate)
        : Error(what), last_estimate_(last_estimate) {}

    double last_estimate() const noexcept { return last_estimate_; }

private:
    double last_estimate_;
};

/// Invalid experiment configuration, raised before anything runs.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ceca
