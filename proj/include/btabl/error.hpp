#pragma once

#include <stdexcept>
#include <string>

namespace btabl {

enum class ErrorKind {
  shape,
  parse,
  format,
  label,
  index,
  contract,
  config,
  data,
  numerical,
  io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library. The kind drives the C status code
/// and the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const char* message) {
  if (!condition) throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace btabl
