#pragma once

#include <stdexcept>
#include <string>

namespace c3sl {

// Error taxonomy shared by the library, the transport, and the CLI.
// Preconditions raise std::invalid_argument; the classes below cover the
// remaining failure domains so the CLI can map them to distinct exit codes.

class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Violation of an internal usage contract (e.g. backward with a stale cache).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace c3sl
