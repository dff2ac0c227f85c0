#pragma once

#include <stdexcept>
#include <string>

namespace cslearn {

// Base class for all library errors. Catch this to handle anything we throw.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Error with a source location in a text file (1-based line number).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace cslearn
