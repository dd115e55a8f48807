#pragma once

#include <stdexcept>
#include <string>

namespace apexgame {

// Bad inputs (geometry, config, file contents). CLI maps these to exit 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failures during computation. CLI maps these to exit 3.
struct ComputeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TooFewSamples : ValidationError {
  using ValidationError::ValidationError;
};

struct DegenerateGeometry : ValidationError {
  using ValidationError::ValidationError;
};

struct OutsideFrenetDomain : ComputeError {
  using ComputeError::ComputeError;
};

struct OutOfRange : ValidationError {
  using ValidationError::ValidationError;
};

struct TrackTooNarrow : ValidationError {
  using ValidationError::ValidationError;
};

struct FrictionOutOfRange : ValidationError {
  using ValidationError::ValidationError;
};

struct SingularFrenet : ComputeError {
  using ComputeError::ComputeError;
};

struct NonFiniteObjective : ComputeError {
  using ComputeError::ComputeError;
};

struct DimensionMismatch : ValidationError {
  using ValidationError::ValidationError;
};

struct EmptyDataset : ValidationError {
  using ValidationError::ValidationError;
};

struct EmptySamples : ValidationError {
  using ValidationError::ValidationError;
};

struct DegenerateRange : ComputeError {
  using ComputeError::ComputeError;
};

struct StartSamplingFailed : ComputeError {
  using ComputeError::ComputeError;
};

}  // namespace apexgame
