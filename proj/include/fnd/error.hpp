#pragma once

#include <stdexcept>
#include <string>

namespace fnd {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input that could not be parsed (CSV, JSON, binary headers).
class ParseError : public Error {
public:
    using Error::Error;
};

// Input parsed but violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A requested combination is not allowed (e.g. extractor unavailable for a corpus).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Reading a persisted artifact failed.
class LoadError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace fnd
