#pragma once

#include <stdexcept>
#include <string>

namespace dwellrec {

// Error taxonomy used across the library. Each maps to one failure class a
// caller can reasonably act on; everything carries a human-readable message.

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OrderingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VocabError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SplitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dwellrec
