#pragma once

#include <stdexcept>
#include <string>

namespace pangenome {

// Parameter/precondition violation; carries the offending field name.
class RangeError : public std::invalid_argument {
 public:
  RangeError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class OverflowError : public std::range_error {
 public:
  using std::range_error::range_error;
};

// A series or adaptive scheme hit its hard iteration cap before reaching tol.
class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A sampler exceeded a configured resource cap (e.g. alive-line count).
class ResourceLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pangenome
