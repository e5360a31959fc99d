#pragma once

#include <stdexcept>
#include <string>

namespace mulgan {

// Error kinds map one-to-one onto the C API status codes.
enum class ErrorKind {
  Config = 2,
  Numerical = 3,
  Io = 4,
  Parse = 5,
  Shape = 6,
  Validation = 7,
  Internal = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(ErrorKind::Parse, w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::Shape, w) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};
struct InternalError : Error {
  explicit InternalError(const std::string& w) : Error(ErrorKind::Internal, w) {}
};

}  // namespace mulgan
