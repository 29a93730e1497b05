#include "uwie/formation.hpp"

#include <cmath>

namespace uwie {

namespace {

template <typename T>
void require_rgb(const Tensor<T>& t, const char* what) {
  require(t.channels() == 3,
          std::string(what) + " must have 3 channels, got " + to_string(t.shape()));
}

}  // namespace

template <typename T>
BasicImage<T> reconstruct(const BasicImage<T>& image, const AmbientLight<T>& ambient,
                          const TransmissionMap<T>& t_inv) {
  require_rgb(image, "reconstruct: image");
  require(t_inv.shape() == image.shape(), "reconstruct: transmission map shape " +
                                              to_string(t_inv.shape()) + " != image shape " +
                                              to_string(image.shape()));
  BasicImage<T> out(image.height(), image.width(), 3);
  const auto in = image.data();
  const auto tm = t_inv.data();
  auto dst = out.data();
  for (std::size_t n = 0; n < in.size(); ++n) {
    const T b = ambient.rgb[n % 3];
    // (I - B) + B can differ from I in the last bit; keep the no-attenuation case exact.
    dst[n] = tm[n] == T{1} ? in[n] : (in[n] - b) * tm[n] + b;
  }
  return out;
}

template <typename T>
ReconstructGrads<T> reconstruct_backward(const BasicImage<T>& image,
                                         const AmbientLight<T>& ambient,
                                         const TransmissionMap<T>& t_inv,
                                         const Tensor<T>& grad_out) {
  require_rgb(image, "reconstruct_backward: image");
  require(t_inv.shape() == image.shape() && grad_out.shape() == image.shape(),
          "reconstruct_backward: shape mismatch");
  ReconstructGrads<T> grads{AmbientLight<T>{}, TransmissionMap<T>(image.height(), image.width(), 3)};
  const auto in = image.data();
  const auto tm = t_inv.data();
  const auto g = grad_out.data();
  auto gt = grads.t_inv.data();
  for (std::size_t n = 0; n < in.size(); ++n) {
    const std::size_t c = n % 3;
    gt[n] = g[n] * (in[n] - ambient.rgb[c]);
    grads.ambient.rgb[c] += g[n] * (T{1} - tm[n]);
  }
  return grads;
}

template <typename T>
BasicImage<T> degrade(const BasicImage<T>& clean, const AmbientLight<T>& ambient,
                      const Tensor<T>& transmission) {
  require_rgb(clean, "degrade: image");
  require(transmission.shape() == clean.shape(), "degrade: transmission shape " +
                                                     to_string(transmission.shape()) +
                                                     " != image shape " +
                                                     to_string(clean.shape()));
  BasicImage<T> out(clean.height(), clean.width(), 3);
  const auto in = clean.data();
  const auto tm = transmission.data();
  auto dst = out.data();
  for (std::size_t n = 0; n < in.size(); ++n) {
    const T t = tm[n];
    require(t > T{0} && t <= T{1}, "degrade: transmission must lie in (0, 1]");
    const T b = ambient.rgb[n % 3];
    dst[n] = in[n] * t + b * (T{1} - t);
  }
  return out;
}

template <typename T>
Tensor<T> transmission_from_depth(const AttenuationSpec<T>& spec) {
  for (const T b : spec.beta) {
    require(b >= T{0} && std::isfinite(b), "transmission_from_depth: beta must be >= 0");
  }
  require(spec.depth.channels() == 1, "transmission_from_depth: depth must be an H x W x 1 map");
  Tensor<T> out(spec.depth.height(), spec.depth.width(), 3);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const T d = spec.depth(y, x, 0);
      require(d >= T{0} && std::isfinite(d), "transmission_from_depth: depth must be >= 0");
      for (int c = 0; c < 3; ++c) out(y, x, c) = std::exp(-spec.beta[c] * d);
    }
  }
  return out;
}

template <typename T>
TransmissionMap<T> invert_transmission(const Tensor<T>& transmission) {
  TransmissionMap<T> out = transmission;
  for (T& v : out.data()) {
    require(v > T{0}, "invert_transmission: transmission must be positive");
    v = T{1} / v;
  }
  return out;
}

#define UWIE_INSTANTIATE_FORMATION(T)                                                      \
  template BasicImage<T> reconstruct(const BasicImage<T>&, const AmbientLight<T>&,         \
                                     const TransmissionMap<T>&);                           \
  template ReconstructGrads<T> reconstruct_backward(                                        \
      const BasicImage<T>&, const AmbientLight<T>&, const TransmissionMap<T>&,             \
      const Tensor<T>&);                                                                   \
  template BasicImage<T> degrade(const BasicImage<T>&, const AmbientLight<T>&,             \
                                 const Tensor<T>&);                                        \
  template Tensor<T> transmission_from_depth(const AttenuationSpec<T>&);                   \
  template TransmissionMap<T> invert_transmission(const Tensor<T>&);

UWIE_INSTANTIATE_FORMATION(float)
UWIE_INSTANTIATE_FORMATION(double)

#undef UWIE_INSTANTIATE_FORMATION

}  // namespace uwie
