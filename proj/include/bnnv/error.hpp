// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace bnnv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed network: wrong dimensions, bad wiring, unknown layer kinds.
class StructuralError : public Error
{
public:
    using Error::Error;
};

/// Input file could not be parsed. The message names file, position and field.
class ParseError : public Error
{
public:
    using Error::Error;
};

/// Invalid engine / property configuration (e.g. unbounded box with SBT on).
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Simplex could not make progress without pivoting on a near-zero element.
class NumericalError : public Error
{
public:
    using Error::Error;
};

/// Caller violated a documented precondition.
class PreconditionError : public Error
{
public:
    using Error::Error;
};

} // namespace bnnv
