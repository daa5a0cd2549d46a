#pragma once

#include <stdexcept>
#include <string>

namespace gsmat {

/// Shapes or sizes that do not fit together.
class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a trustworthy result
/// (singular system, non-finite input, divergence).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed serialized data. `field()` names the offending header field.
class format_error : public std::runtime_error {
 public:
  format_error(std::string field, const std::string& what)
      : std::runtime_error("format error in '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Filesystem failure while loading or saving.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gsmat
