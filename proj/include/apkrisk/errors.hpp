#pragma once

#include <stdexcept>
#include <string>

namespace apkrisk {

// Base for everything this library throws on unrecoverable input problems.
// Recoverable per-item problems (corrupt archive entries, malformed feed
// records, bad sidecar rows) are returned as records, not thrown.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public Error {
public:
    using Error::Error;
};

// File is not a valid ZIP container.
class NotAnArchiveError : public Error {
public:
    using Error::Error;
};

// Missing ELF magic.
class NotAnElfError : public Error {
public:
    using Error::Error;
};

// ELF header/section table inconsistent with the file contents.
class MalformedElfError : public Error {
public:
    using Error::Error;
};

// Signature file problems carry the offending line when known.
class SignatureError : public Error {
public:
    SignatureError(const std::string& msg, int line) : Error(format(msg, line)), line_(line) {}
    int line() const { return line_; }

private:
    static std::string format(const std::string& msg, int line) {
        return line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg;
    }
    int line_;
};

class DuplicateProductError : public SignatureError {
public:
    using SignatureError::SignatureError;
};

class EmptySignatureError : public SignatureError {
public:
    using SignatureError::SignatureError;
};

class SignatureParseError : public SignatureError {
public:
    using SignatureError::SignatureError;
};

class UnrecognizedFeedFormatError : public Error {
public:
    using Error::Error;
};

class UnknownProductError : public Error {
public:
    using Error::Error;
};

} // namespace apkrisk
