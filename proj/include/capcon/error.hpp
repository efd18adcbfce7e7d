#pragma once

#include <stdexcept>
#include <string>

namespace capcon {

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotSPD : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

class TooLargeForDense : public Error {
public:
    using Error::Error;
};

class NotEdgeAligned : public Error {
public:
    using Error::Error;
};

class NotTridiagonal : public Error {
public:
    using Error::Error;
};

/// Lanczos recurrence produced a non-positive preconditioned norm.
class Breakdown : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& msg)
{
    if (!cond)
        throw InvalidArgument(msg);
}

} // namespace capcon
