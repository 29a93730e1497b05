#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uwie {

// A caller broke an operation's precondition (shape mismatch, bad dilation, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid run configuration or dataset layout.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, std::string_view what)
      : std::runtime_error(path.string() + ": " + std::string(what)), path_(path) {}

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

class CorruptCheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a NaN/Inf loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, std::string_view message) {
  if (!condition) throw ContractError(std::string(message));
}

}  // namespace uwie
