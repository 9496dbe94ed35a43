#pragma once

#include <stdexcept>
#include <string>

namespace moge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid routing dimensions (divisibility, K > N, ...).
class ConfigError final : public Error {
public:
    using Error::Error;
};

class DimensionError final : public Error {
public:
    using Error::Error;
};

// Malformed or non-finite input data, including unparsable files.
class DataError final : public Error {
public:
    using Error::Error;
};

class EmptyInputError final : public Error {
public:
    using Error::Error;
};

class RangeError final : public Error {
public:
    using Error::Error;
};

// A scalar argument outside its domain (non-positive cost, alpha not in [0,1]).
class ArgumentError final : public Error {
public:
    using Error::Error;
};

}  // namespace moge
