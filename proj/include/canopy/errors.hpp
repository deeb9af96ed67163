#pragma once

#include <stdexcept>
#include <string>

namespace canopy {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/op shape disagreements (reports both shapes in the message).
struct ShapeError : Error {
  using Error::Error;
};

// Violated operation precondition (unsorted samples, bad cutoff, ...).
struct ContractError : Error {
  using Error::Error;
};

struct BoundsError : Error {
  using Error::Error;
};

// NaN inputs, log of non-positive values, training divergence.
struct NumericError : Error {
  using Error::Error;
};

// Dataset / bundle inconsistencies (index misalignment, missing poses).
struct DataError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// A pipeline stage input that has not been produced yet. Carries the path and
// the stage that would produce it so the CLI can print an actionable message.
struct MissingArtifactError : DataError {
  MissingArtifactError(const std::string& path, const std::string& producing_stage)
      : DataError("missing artifact: " + path + " (produced by stage '" + producing_stage +
                  "'; run it first)"),
        path(path),
        producing_stage(producing_stage) {}
  std::string path;
  std::string producing_stage;
};

}  // namespace canopy
