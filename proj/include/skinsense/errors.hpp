#pragma once

#include <stdexcept>
#include <string>

namespace skinsense {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed textual input (bit strings, CSV rows, config lines).
class ParseError : public Error {
public:
    using Error::Error;
};

class EmptyMessage : public Error {
public:
    EmptyMessage() : Error("empty message") {}
};

// A symbol field outside the profile's value set.
class IllegalParameter : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class RateMismatch : public Error {
public:
    using Error::Error;
};

class UpsampleUnsupported : public Error {
public:
    using Error::Error;
};

class TooShort : public Error {
public:
    using Error::Error;
};

class NoSymbolsFound : public Error {
public:
    NoSymbolsFound() : Error("no symbols found") {}
};

class PilotNotFound : public Error {
public:
    using Error::Error;
};

} // namespace skinsense
