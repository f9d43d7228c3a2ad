#pragma once

#include <stdexcept>
#include <string>

namespace ubiphysio {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file or record could not be parsed. frame() is -1 when not frame-specific.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, long frame = -1)
      : Error(what), frame_(frame) {}
  long frame() const { return frame_; }

 private:
  long frame_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DegeneratePoseError : public Error {
 public:
  using Error::Error;
};

class InsufficientFramesError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace ubiphysio
