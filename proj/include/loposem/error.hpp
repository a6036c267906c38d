#pragma once

#include <stdexcept>
#include <string>

namespace loposem {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Arrays that should share a grid or quadrature do not.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A value lies outside the domain of a functional (negative density, zero mass, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid parameter combination. `line()` is nonzero when the error comes from a config file.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// A run produced a non-finite or otherwise unusable value.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace loposem
