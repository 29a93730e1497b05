#pragma once

#include <ostream>

#include "options.hpp"

namespace uwie::cli {

// Each command validates its options (throwing UsageError) before touching the file system,
// then throws uwie exceptions for runtime failures. Outputs written before a failure are
// removed again.
int run_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);
int run_enhance(const EnhanceOptions& opts, std::ostream& out, std::ostream& err);
int run_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err);
int run_benchmark(const BenchmarkOptions& opts, std::ostream& out, std::ostream& err);
int run_synthesize(const SynthesizeOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace uwie::cli
