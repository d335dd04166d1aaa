#pragma once

#include <stdexcept>
#include <string>

namespace specwave {

// Invalid or inconsistent user-supplied configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A sample produced a non-finite state or violated a runtime contract mid-run.
class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace specwave
