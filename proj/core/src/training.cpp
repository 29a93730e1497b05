#include "uwie/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "uwie/checkpoint.hpp"
#include "uwie/image_io.hpp"

namespace uwie {

template <typename T>
LossResult<T> mse_loss(const BasicImage<T>& pred, const BasicImage<T>& ref) {
  require(pred.shape() == ref.shape(), "mse_loss: shape " + to_string(pred.shape()) +
                                           " != " + to_string(ref.shape()));
  LossResult<T> result{0.0, Tensor<T>(pred.height(), pred.width(), pred.channels())};
  const auto p = pred.data();
  const auto r = ref.data();
  auto g = result.grad.data();
  const double n = static_cast<double>(p.size());
  const T scale = static_cast<T>(2.0 / n);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T d = p[i] - r[i];
    sum += static_cast<double>(d) * static_cast<double>(d);
    g[i] = scale * d;
  }
  result.loss = sum / n;
  return result;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size != 1) throw ConfigError("batch size is fixed at 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (train_resolution && (train_resolution->height < 1 || train_resolution->width < 1)) {
    throw ConfigError("training resolution must be positive");
  }
  if (checkpoint_every < 0) throw ConfigError("checkpoint interval must be >= 0");
}

template <typename T>
void adam_step(NetworkParams<T>& params, const ParamGrads<T>& grads, AdamState<T>& state,
               const TrainConfig& cfg) {
  auto p = params.buffers();
  const auto g = grads.buffers();
  auto m = state.m.buffers();
  auto v = state.v.buffers();
  require(p.size() == g.size() && p.size() == m.size() && p.size() == v.size(),
          "adam_step: parameter/gradient/state layouts differ");
  for (std::size_t n = 0; n < p.size(); ++n) {
    require(p[n].size() == g[n].size() && p[n].size() == m[n].size() &&
                p[n].size() == v[n].size(),
            "adam_step: shape mismatch in " + architecture_manifest()[n].name);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T one_minus_b1 = static_cast<T>(1.0 - cfg.beta1);
  const T one_minus_b2 = static_cast<T>(1.0 - cfg.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
  const T lr = static_cast<T>(cfg.learning_rate);
  const T eps = static_cast<T>(cfg.epsilon);

  for (std::size_t n = 0; n < p.size(); ++n) {
    for (std::size_t i = 0; i < p[n].size(); ++i) {
      const T gi = g[n][i];
      m[n][i] = b1 * m[n][i] + one_minus_b1 * gi;
      v[n][i] = b2 * v[n][i] + one_minus_b2 * gi * gi;
      const T m_hat = m[n][i] / correction1;
      const T v_hat = v[n][i] / correction2;
      p[n][i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

namespace {

Image fit_to(const Image& img, const std::optional<Resolution>& res) {
  if (!res || (img.height() == res->height && img.width() == res->width)) return img;
  return resize_bilinear(img, res->height, res->width);
}

}  // namespace

TrainResult train(const std::vector<TrainingPair>& dataset, const TrainConfig& cfg,
                  NetworkParams<float> params, const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  params.validate();

  std::vector<TrainingPair> pairs;
  pairs.reserve(dataset.size());
  for (const auto& pair : dataset) {
    if (pair.input.channels() != 3 || pair.target.channels() != 3) {
      throw ConfigError("training pair '" + pair.id + "' is not a 3-channel image pair");
    }
    pairs.push_back({pair.id, fit_to(pair.input, cfg.train_resolution),
                     fit_to(pair.target, cfg.train_resolution)});
    if (pairs.back().input.shape() != pairs.back().target.shape()) {
      throw ConfigError("training pair '" + pair.id + "' has mismatched input/reference sizes");
    }
  }

  TrainResult result{std::move(params), {}, 0};
  AdamState<float> state;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const bool checkpointing = !cfg.checkpoint_path.empty();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (const std::size_t idx : order) {
      const auto& pair = pairs[idx];
      auto fwd = forward(pair.input, result.params, cfg.head);
      auto loss = mse_loss(fwd.enhanced, pair.target);
      if (!std::isfinite(loss.loss)) {
        std::ostringstream msg;
        msg << "non-finite loss (" << loss.loss << ") on image '" << pair.id << "' at epoch "
            << epoch << ", step " << result.steps + 1;
        throw NumericError(msg.str());
      }
      const auto grads = backward(fwd.cache, loss.grad, result.params);
      adam_step(result.params, grads, state, cfg);
      ++result.steps;
      loss_sum += loss.loss;
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    EpochRecord record{epoch, loss_sum / static_cast<double>(pairs.size()), elapsed.count()};
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
    if (checkpointing && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
        epoch != cfg.epochs) {
      save_checkpoint(result.params, cfg.checkpoint_path);
    }
  }
  if (checkpointing) save_checkpoint(result.params, cfg.checkpoint_path);
  return result;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    out << "epoch,mean_loss,seconds\n";
    out.precision(17);
    for (const auto& e : history.epochs) {
      out << e.epoch << ',' << e.mean_loss << ',' << e.seconds << '\n';
    }
    if (!out) throw IoError(path, "write failed");
  }
  std::filesystem::rename(tmp, path);
}

template LossResult<float> mse_loss(const BasicImage<float>&, const BasicImage<float>&);
template LossResult<double> mse_loss(const BasicImage<double>&, const BasicImage<double>&);
template void adam_step(NetworkParams<float>&, const ParamGrads<float>&, AdamState<float>&,
                        const TrainConfig&);
template void adam_step(NetworkParams<double>&, const ParamGrads<double>&, AdamState<double>&,
                        const TrainConfig&);

}  // namespace uwie
