#pragma once

#include <array>

#include "uwie/tensor.hpp"

// Underwater image formation: I = D * t + B * (1 - t) with t = exp(-beta * d),
// inverted as D = (I - B) * t_inv + B where t_inv = exp(beta * d).
namespace uwie {

template <typename T>
struct AmbientLight {
  std::array<T, 3> rgb{};

  Tensor<T> as_tensor() const { return Tensor<T>(Shape{1, 1, 3}, {rgb[0], rgb[1], rgb[2]}); }
  static AmbientLight from_tensor(const Tensor<T>& t) {
    require(t.shape() == Shape{1, 1, 3}, "ambient light must be a 1x1x3 tensor");
    return AmbientLight{{t(0, 0, 0), t(0, 0, 1), t(0, 0, 2)}};
  }
  friend bool operator==(const AmbientLight&, const AmbientLight&) = default;
};

// Per-pixel, per-channel inverse transmission exp(beta_c * d(x)).
template <typename T>
using TransmissionMap = Tensor<T>;

template <typename T>
struct AttenuationSpec {
  std::array<T, 3> beta{};  // 1/m, per channel
  Tensor<T> depth;          // H x W x 1, meters

  static AttenuationSpec uniform(std::array<T, 3> beta, T depth, int height, int width) {
    return AttenuationSpec{beta, Tensor<T>(height, width, 1, depth)};
  }
};

// D = (I - B) * t_inv + B. Output is not clamped.
template <typename T>
BasicImage<T> reconstruct(const BasicImage<T>& image, const AmbientLight<T>& ambient,
                          const TransmissionMap<T>& t_inv);

template <typename T>
struct ReconstructGrads {
  AmbientLight<T> ambient;     // sum_x grad(x) * (1 - t_inv(x)) per channel
  TransmissionMap<T> t_inv;    // grad(x) * (I(x) - B)
};

template <typename T>
ReconstructGrads<T> reconstruct_backward(const BasicImage<T>& image,
                                         const AmbientLight<T>& ambient,
                                         const TransmissionMap<T>& t_inv,
                                         const Tensor<T>& grad_out);

// I = D * t + B * (1 - t); t must lie in (0, 1].
template <typename T>
BasicImage<T> degrade(const BasicImage<T>& clean, const AmbientLight<T>& ambient,
                      const Tensor<T>& transmission);

// t_c(x) = exp(-beta_c * d(x)), an H x W x 3 map in (0, 1].
template <typename T>
Tensor<T> transmission_from_depth(const AttenuationSpec<T>& spec);

// Elementwise 1 / t.
template <typename T>
TransmissionMap<T> invert_transmission(const Tensor<T>& transmission);

}  // namespace uwie
