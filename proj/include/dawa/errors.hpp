#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dawa {

// Shape disagreement between operands (vector lengths, layer sizes).
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Caller passed a value outside an operation's documented domain.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Object used out of sequence, e.g. a tape that does not belong to the model.
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace dawa
