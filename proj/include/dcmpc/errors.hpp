#ifndef DCMPC_ERRORS_HPP
#define DCMPC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dcmpc {

/// Argument outside the mathematical domain of an operation (e.g. m <= 0).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// M/M/1 queue without a stationary regime (m * mu <= L).
class InstabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Misuse of an API: misaligned lengths, bad indices, empty sets.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A convexity precondition does not hold (CRAC lower bound below 11 C).
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Parse errors in configuration and trace files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A window program has no strictly feasible point.
class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(const std::string& what, long window)
        : std::runtime_error(what), window_(window) {}

    long window() const noexcept { return window_; }

private:
    long window_;
};

}  // namespace dcmpc

#endif  // DCMPC_ERRORS_HPP
