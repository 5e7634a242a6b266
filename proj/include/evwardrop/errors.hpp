#pragma once

#include <stdexcept>
#include <string>

namespace evw {

/// Invalid argument or malformed input (file, flag, value out of range).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A quantity is requested where it is mathematically undefined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace evw
