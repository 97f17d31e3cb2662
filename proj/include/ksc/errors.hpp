#pragma once

#include <stdexcept>
#include <string>

namespace ksc {

/// Precondition or domain violation (bad arguments, inconsistent inputs).
class validation_error : public std::runtime_error {
public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or truncated file content.
class format_error : public std::runtime_error {
public:
  explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem failure (open/read/write).
class io_error : public std::runtime_error {
public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure (singular system, non-convergence, undefined statistic).
class numerical_error : public std::runtime_error {
public:
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace ksc
