#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace clusterprobe {

// Base error for every module. what() is prefixed with the module name so the
// CLI can print it verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

}  // namespace clusterprobe
