#pragma once

#include <stdexcept>

namespace pcprep {

// A file could not be opened, read, renamed or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file or document exists but its contents violate the expected format.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pcprep
