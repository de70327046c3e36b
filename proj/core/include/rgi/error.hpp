#pragma once

#include <stdexcept>
#include <string>

namespace rgi {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// geometry
struct DegeneratePolygon : Error {
  using Error::Error;
};

// ism
struct MicOutsideRoom : Error {
  using Error::Error;
};

// dataset / checkpoint I/O
struct IoFailure : Error {
  using Error::Error;
};
struct InvalidConfig : Error {
  using Error::Error;
};
struct BadMagic : Error {
  using Error::Error;
};
struct VersionMismatch : Error {
  using Error::Error;
};
struct TruncatedFile : Error {
  using Error::Error;
};
struct AllZeroInput : Error {
  using Error::Error;
};

// model
struct ShapeMismatch : Error {
  using Error::Error;
};
struct CacheMismatch : Error {
  using Error::Error;
};

// training
struct BothZero : Error {
  using Error::Error;
};
struct NonFiniteGradient : Error {
  using Error::Error;
};

// metrics
struct EmptyDataset : Error {
  using Error::Error;
};
struct NoPredictedWalls : Error {
  using Error::Error;
};
struct ZeroNormalEstimate : Error {
  using Error::Error;
};

}  // namespace rgi
