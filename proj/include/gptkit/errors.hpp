#pragma once

#include <stdexcept>
#include <string>

namespace gptkit {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};
struct ProbabilityOutOfRange : Error {
  using Error::Error;
};
struct EmptyGeneratorList : Error {
  using Error::Error;
};
struct NotSimplicial : Error {
  using Error::Error;
};
struct NoiseOutOfRange : Error {
  using Error::Error;
};
struct RateOutOfRange : Error {
  using Error::Error;
};
struct UnknownLabel : Error {
  using Error::Error;
};
struct InvalidMeasurement : Error {
  using Error::Error;
};
struct DegenerateMatrix : Error {
  using Error::Error;
};
struct DimensionTooLarge : Error {
  using Error::Error;
};
struct DegenerateCone : Error {
  using Error::Error;
};
struct NullOutcomeProbabilityZero : Error {
  using Error::Error;
};
struct WrongScenarioKind : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct CountsFormatError : Error {
  using Error::Error;
};

}  // namespace gptkit
