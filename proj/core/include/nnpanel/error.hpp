#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nnpanel {

enum class ErrorKind {
  invalid_input,
  domain,
  dimension_mismatch,
  collinearity,
  rank_deficient,
  parse,
  unbalanced_panel,
  numerical_failure,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Input-side kinds map to CLI exit code 2, numerical ones to 3.
bool is_input_error(ErrorKind kind) noexcept;

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

}  // namespace nnpanel
