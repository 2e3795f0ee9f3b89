#pragma once

#include <stdexcept>
#include <string>

namespace br {

// Every failure surfaced by the library is a br::Error; the message carries the
// condition name (e.g. "empty batch") so callers and the CLI can report it verbatim.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace br
