#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nsqla
{

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// S(sigma) failed to factor; optimizers treat this as an infeasible point.
class NotPositiveDefinite : public Error
{
public:
  using Error::Error;
};

/// Malformed input text (grid tables, datasets, configs) with its 1-based line.
class ParseError : public Error
{
public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
    : Error(source + ":" + std::to_string(line) + ": " + what), line_(line)
  {
  }

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

}  // namespace nsqla
