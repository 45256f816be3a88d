#ifndef HSPI_ERRORS_HPP
#define HSPI_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hspi {

/// Invalid configuration or arguments. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed, inconsistent or unreadable data. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or failed numerical procedures. Maps to CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace hspi

#endif // HSPI_ERRORS_HPP
