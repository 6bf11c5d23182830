#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fpscope {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input document (IR, manifest, JSON, CSV). Line and column are
// 1-based; zero means "not positioned".
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line = 0,
             std::size_t column = 0, const std::string& source = {})
      : Error(format(message, line, column, source)),
        message_(message),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& message() const noexcept { return message_; }

 private:
  static std::string format(const std::string& message, std::size_t line,
                            std::size_t column, const std::string& source) {
    std::string out = source;
    if (line > 0) {
      if (!out.empty()) out += ':';
      out += std::to_string(line) + ':' + std::to_string(column);
    }
    if (!out.empty()) out += ": ";
    return out + message;
  }

  std::string message_;
  std::size_t line_;
  std::size_t column_;
};

// Bad configuration or out-of-range parameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Failure while running an analysis over otherwise well-formed inputs.
class AnalysisError : public Error {
 public:
  using Error::Error;
};

}  // namespace fpscope
