#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pimdn {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration, file or input problems (CLI exit code 2).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical failures during training or simulation (CLI exit code 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public InputError {
 public:
  using InputError::InputError;
};

class InvalidConfig : public InputError {
 public:
  using InputError::InputError;
};

class EmptyBatch : public InputError {
 public:
  EmptyBatch() : InputError("batch is empty") {}
};

class MissingLabel : public InputError {
 public:
  explicit MissingLabel(std::size_t row)
      : InputError("record " + std::to_string(row) + " has no class label"), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public InputError {
 public:
  using InputError::InputError;
};

class GridMismatch : public InputError {
 public:
  GridMismatch() : InputError("density curves are defined on different grids") {}
};

class GridTooNarrow : public InputError {
 public:
  using InputError::InputError;
};

class UnstableTimestep : public InputError {
 public:
  using InputError::InputError;
};

/// Raised by the tape when an operation produces a non-finite value.
class NonFiniteValue : public NumericError {
 public:
  explicit NonFiniteValue(long node)
      : NumericError("non-finite value at tape node " + std::to_string(node)), node_(node) {}
  long node() const { return node_; }

 private:
  long node_;
};

class NonFiniteGradient : public NumericError {
 public:
  NonFiniteGradient(long iteration, std::size_t component)
      : NumericError("non-finite gradient component " + std::to_string(component) +
                     " at iteration " + std::to_string(iteration)),
        iteration_(iteration),
        component_(component) {}
  long iteration() const { return iteration_; }
  std::size_t component() const { return component_; }

 private:
  long iteration_;
  std::size_t component_;
};

class SimulationDiverged : public NumericError {
 public:
  explicit SimulationDiverged(long step)
      : NumericError("simulation diverged at step " + std::to_string(step)), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class SamplerDiverged : public NumericError {
 public:
  explicit SamplerDiverged(long step)
      : NumericError("flow sampler diverged at Euler step " + std::to_string(step)), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace pimdn
