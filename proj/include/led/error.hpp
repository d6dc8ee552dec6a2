#pragma once

#include <stdexcept>
#include <string>

namespace led {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor extents or operand shapes do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Operation invoked in the wrong network/block phase or in the wrong order.
class PhaseError : public Error {
public:
    using Error::Error;
};

// Bad input data: missing files, malformed manifests, invalid values.
class DataError : public Error {
public:
    using Error::Error;
};

// Container magic/version/payload/checksum failure.
class CorruptError : public Error {
public:
    using Error::Error;
};

// NaN/Inf encountered where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Gain-line fit with fewer than two points.
class UnderdeterminedError : public Error {
public:
    using Error::Error;
};

// Gain-line fit where all system gains coincide.
class DegenerateError : public Error {
public:
    using Error::Error;
};

} // namespace led
