#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace turnkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for invalid configuration values; carries the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Non-fatal findings collected while processing (dropped tokens, orphan
// backchannels, ...). Callers decide whether to print them.
struct Diagnostics {
  std::vector<std::string> warnings;
  void warn(std::string msg) { warnings.push_back(std::move(msg)); }
};

}  // namespace turnkit
