#pragma once

#include <stdexcept>
#include <string>

namespace dafe {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreement; message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// A softmax row with every entry masked.
struct MaskError : Error {
  using Error::Error;
};

// Cross-entropy over a batch where every position is ignored.
struct EmptyLossError : Error {
  using Error::Error;
};

// Unregistered domain/task id, unknown parameter id, or similar.
struct LookupError : Error {
  using Error::Error;
};

// Empty or malformed input data.
struct DataError : Error {
  using Error::Error;
};

// Sequence exceeds the model's positional-encoding range.
struct LengthError : Error {
  using Error::Error;
};

// Invalid configuration (missing path, bad key, missing seed, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite loss or divergence during training.
struct NumericalError : Error {
  using Error::Error;
};

// A function expected to be deterministic under a fixed seed was not.
struct ReproducibilityError : Error {
  using Error::Error;
};

}  // namespace dafe
