#pragma once

#include <stdexcept>
#include <string>

namespace qkvcomm {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments or inputs that violate an operation's preconditions
// (invalid spec, empty tensor, out-of-range code, oversized entry, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Failures while reading or writing files (cache files, spill files).
class IoError : public Error {
public:
    using Error::Error;
};

// Structured decode failures for the wire format and the binary
// file containers that share its encoding conventions.
enum class WireCode {
    BadMagic,
    UnsupportedVersion,
    CrcMismatch,
    Truncated,
    MalformedLength,
    UnrepresentableField,
};

class WireError : public Error {
public:
    WireError(WireCode code, const std::string& what) : Error(what), code_(code) {}
    WireCode code() const noexcept { return code_; }

private:
    WireCode code_;
};

// Connection and framing failures on a transport.
class TransportError : public Error {
public:
    using Error::Error;
};

const char* wire_code_name(WireCode code);

}  // namespace qkvcomm
