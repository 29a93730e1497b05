#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "uwie/network.hpp"

namespace uwie {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;
};

// Mean squared error over every pixel and channel, with its gradient 2 (pred - ref) / N.
template <typename T>
LossResult<T> mse_loss(const BasicImage<T>& pred, const BasicImage<T>& ref);

struct Resolution {
  int height = 256;
  int width = 256;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 3000;
  int batch_size = 1;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // nullopt trains at each image's native resolution.
  std::optional<Resolution> train_resolution = Resolution{};
  // Write a checkpoint every K epochs (0 = only at completion). Ignored without a path.
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_path;
  OutputHead head = OutputHead::physical;

  // Throws ConfigError.
  void validate() const;
};

template <typename T>
struct AdamState {
  NetworkParams<T> m = NetworkParams<T>::zeros();
  NetworkParams<T> v = NetworkParams<T>::zeros();
  std::int64_t step = 0;
};

// One bias-corrected Adam update; increments state.step first.
template <typename T>
void adam_step(NetworkParams<T>& params, const ParamGrads<T>& grads, AdamState<T>& state,
               const TrainConfig& cfg);

struct TrainingPair {
  std::string id;
  Image input;
  Image target;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  NetworkParams<float> params;
  TrainHistory history;
  std::int64_t steps = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Batch size 1, one optimizer step per pair, pairs shuffled every epoch with a generator seeded
// from cfg.seed. Throws ConfigError for an empty dataset, NumericError on a non-finite loss.
TrainResult train(const std::vector<TrainingPair>& dataset, const TrainConfig& cfg,
                  NetworkParams<float> params, const EpochCallback& on_epoch = {});

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace uwie
