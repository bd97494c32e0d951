#pragma once

#include <stdexcept>
#include <string>

namespace entail_guard {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid domain values: out-of-range probabilities, bad offsets, malformed records.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Network-level failure after all retry attempts.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int attempts)
        : Error(what), attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_ = 1;
};

// Token budget cannot cover the prompt.
class BudgetError : public Error {
public:
    using Error::Error;
};

// Response or file content that cannot be parsed into the expected shape.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace entail_guard
