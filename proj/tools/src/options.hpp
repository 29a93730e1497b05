#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "uwie/training.hpp"

namespace uwie::cli {

// Bad flags or flag combinations, detected before any work starts. Maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReportFormat { csv, json };

struct CommonOptions {
  std::string checkpoint;
  std::string input;
  std::string output;
  std::uint64_t seed = 0;
  ReportFormat format = ReportFormat::csv;
};

struct TrainOptions {
  CommonOptions common;
  std::string data;
  std::string raw_dir = "raw-890";
  std::string reference_dir = "reference-890";
  int epochs = 3000;
  double lr = 1e-3;
  std::string resize = "256x256";
  int checkpoint_every = 0;
};

struct EnhanceOptions {
  CommonOptions common;
  bool dump_ambient = false;
  bool dump_transmission = false;
};

struct EvaluateOptions {
  CommonOptions common;
  std::string reference;
};

struct BenchmarkOptions {
  CommonOptions common;
  int width = 640;
  int height = 480;
  int iters = 10;
};

struct SynthesizeOptions {
  CommonOptions common;
  std::string beta;
  double depth = 0.0;
  std::string ambient;
};

// "r,g,b" with three finite numbers.
std::array<double, 3> parse_triple(const std::string& text, const std::string& flag);

// "HxW" with positive integers, or "native".
std::optional<Resolution> parse_resize(const std::string& text);

}  // namespace uwie::cli
