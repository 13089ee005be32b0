#pragma once

#include <stdexcept>
#include <string>

namespace phe {

// Malformed specs, configs, or out-of-range indices supplied by the caller.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// File system failures; the message always carries the offending path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// A factorization that must succeed did not. Signals corrupted state.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace phe
