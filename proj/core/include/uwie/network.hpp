#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uwie/formation.hpp"
#include "uwie/tensor.hpp"

namespace uwie {

enum class ParamKind { kernel, bias, slope };

const char* to_string(ParamKind kind);

struct ParamInfo {
  std::string name;
  std::vector<int> shape;
  ParamKind kind;

  std::size_t count() const;
  friend bool operator==(const ParamInfo&, const ParamInfo&) = default;
};

// Ordered listing of every learnable buffer. This order is the checkpoint order and the order
// of NetworkParams::buffers().
const std::vector<ParamInfo>& architecture_manifest();

// Total number of learnable scalars in the fixed architecture.
std::size_t architecture_parameter_count();

// Dilation rates of the three hidden 3x3 groups of the transmission estimator.
inline constexpr int kTransmissionDilations[3] = {1, 2, 5};
inline constexpr float kInitialPreluSlope = 0.25f;

// Ambient light estimator:
//   conv3x3(3->3), PReLU, conv3x3(3->3), PReLU, global mean pool,
//   conv1x1(3->3), PReLU, conv1x1(3->3)
template <typename T>
struct BackscatterParams {
  ConvKernel<T> conv1, conv2, conv3, conv4;
  std::vector<T> prelu1, prelu2, prelu3;
  friend bool operator==(const BackscatterParams&, const BackscatterParams&) = default;
};

// Inverse-transmission estimator over concat(image, broadcast(B)):
//   conv3x3 d1 (6->8), PReLU, conv3x3 d2 (8->8), PReLU, conv3x3 d5 (8->8), PReLU,
//   conv3x3 d1 (8->3)
template <typename T>
struct TransmissionParams {
  ConvKernel<T> conv1, conv2, conv3, conv4;
  std::vector<T> prelu1, prelu2, prelu3;
  friend bool operator==(const TransmissionParams&, const TransmissionParams&) = default;
};

template <typename T>
struct NetworkParams {
  BackscatterParams<T> backscatter;
  TransmissionParams<T> transmission;

  // Architecture-shaped parameters, every value zero.
  static NetworkParams zeros();

  // Views over every buffer in architecture_manifest() order.
  std::vector<std::span<T>> buffers();
  std::vector<std::span<const T>> buffers() const;

  std::size_t parameter_count() const;

  // Throws ContractError naming the first layer whose shape deviates from the manifest.
  void validate() const;

  template <typename U>
  NetworkParams<U> cast() const {
    NetworkParams<U> out = NetworkParams<U>::zeros();
    auto src = buffers();
    auto dst = out.buffers();
    for (std::size_t n = 0; n < src.size(); ++n) {
      for (std::size_t i = 0; i < src[n].size(); ++i) dst[n][i] = static_cast<U>(src[n][i]);
    }
    return out;
  }

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

template <typename T>
using ParamGrads = NetworkParams<T>;

// How the final image is produced. `direct` replaces the physical reconstruction with the
// transmission estimator's raw 3-channel output; it exists for ablation only.
enum class OutputHead { physical, direct };

template <typename T>
struct ForwardCache {
  OutputHead head = OutputHead::physical;
  BasicImage<T> input;

  Tensor<T> bs_pre1, bs_act1, bs_pre2, bs_act2, bs_pooled, bs_pre3, bs_act3;
  AmbientLight<T> ambient;

  Tensor<T> tr_input;  // concat(image, broadcast(ambient)), 6 channels
  Tensor<T> tr_pre1, tr_act1, tr_pre2, tr_act2, tr_pre3, tr_act3;
  TransmissionMap<T> t_inv;
};

template <typename T>
struct ForwardResult {
  BasicImage<T> enhanced;
  ForwardCache<T> cache;
};

// He-style initialization scaled for PReLU: N(0, 2 / ((1 + a^2) * fan_in)), zero biases,
// slopes 0.25. Deterministic in `seed`.
NetworkParams<float> init_params(std::uint64_t seed);

template <typename T>
AmbientLight<T> estimate_backscatter(const BasicImage<T>& image, const NetworkParams<T>& params);

template <typename T>
TransmissionMap<T> estimate_direct_transmission(const BasicImage<T>& image,
                                                const AmbientLight<T>& ambient,
                                                const NetworkParams<T>& params);

template <typename T>
ForwardResult<T> forward(const BasicImage<T>& image, const NetworkParams<T>& params,
                         OutputHead head = OutputHead::physical);

// Gradient of sum(grad_enhanced * enhanced) with respect to every parameter. The ambient light
// receives gradient from both the reconstruction and the transmission estimator's input.
template <typename T>
ParamGrads<T> backward(const ForwardCache<T>& cache, const Tensor<T>& grad_enhanced,
                       const NetworkParams<T>& params);

}  // namespace uwie
