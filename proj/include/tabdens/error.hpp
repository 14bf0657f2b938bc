#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tabdens {

//! Machine-readable error categories. The CLI prints the name next to the
//! message and maps categories to exit codes.
enum class ErrorCode
{
  validation,
  grid_too_coarse,
  empty_class,
  inconsistent_moments,
  numerical_degeneracy,
  optimizer_failure,
  io
};

inline std::string_view to_string(ErrorCode code)
{
  switch (code) {
    case ErrorCode::validation:
      return "validation";
    case ErrorCode::grid_too_coarse:
      return "grid_too_coarse";
    case ErrorCode::empty_class:
      return "empty_class";
    case ErrorCode::inconsistent_moments:
      return "inconsistent_moments";
    case ErrorCode::numerical_degeneracy:
      return "numerical_degeneracy";
    case ErrorCode::optimizer_failure:
      return "optimizer_failure";
    case ErrorCode::io:
      return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error
{
public:
  Error(ErrorCode code, const std::string& what)
    : std::runtime_error(what)
    , code_(code)
  {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCode code, const std::string& what)
{
  throw Error(code, what);
}

inline void require(bool ok, const std::string& what)
{
  if (!ok)
    fail(ErrorCode::validation, what);
}

} // namespace detail
} // namespace tabdens
