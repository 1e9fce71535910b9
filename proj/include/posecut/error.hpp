#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace posecut {

// Base of every exception thrown by the library. `module()` names the
// subsystem that raised it; the CLI prefixes messages with it.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// Malformed document (not JSON, wrong top-level shape).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("model", what) {}
};

// Missing, mistyped or unknown field. The message names the field path.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error("model", what) {}
};

// A domain invariant does not hold. The message names the offending entity.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error("model", what) {}
};

class MissingOffset : public Error {
 public:
  MissingOffset(std::string module, const std::string& what) : Error(std::move(module), what) {}
};

class MissingWeights : public Error {
 public:
  explicit MissingWeights(const std::string& what) : Error("pairwise", what) {}
};

class NoGroundTruth : public Error {
 public:
  explicit NoGroundTruth(const std::string& what) : Error("pairwise", what) {}
};

class InfeasibleSolution : public Error {
 public:
  explicit InfeasibleSolution(const std::string& what) : Error("ilp", what) {}
};

class RefusedTooLarge : public Error {
 public:
  explicit RefusedTooLarge(const std::string& what) : Error("solver", what) {}
};

class ScheduleError : public Error {
 public:
  explicit ScheduleError(const std::string& what) : Error("solver", what) {}
};

class NoAnchorJoints : public Error {
 public:
  explicit NoAnchorJoints(const std::string& what) : Error("synth", what) {}
};

}  // namespace posecut
