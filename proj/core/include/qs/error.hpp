#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qs {

enum class Errc {
  kChannelClosed,
  kRuntimeShutdown,
  kDuplicateHandler,
  kSessionEnded,
  kSessionAlreadyOpen,
  kHandlerPoisoned,
};

std::string_view to_string(Errc code) noexcept;

/// Error raised by the channel and runtime layers. The code identifies the
/// violated contract; the message carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Text-format error with a 1-based source location.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& what)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) +
                           ": " + what),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace qs
