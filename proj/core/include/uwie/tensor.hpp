#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "uwie/errors.hpp"

namespace uwie {

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

// Dense H x W x C array, row-major with the channel index fastest.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(int height, int width, int channels, T fill = T{0})
      : shape_{height, width, channels} {
    require(height > 0 && width > 0 && channels > 0,
            "tensor dimensions must be positive, got " + to_string(shape_));
    data_.assign(shape_.size(), fill);
  }
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    require(shape.height > 0 && shape.width > 0 && shape.channels > 0,
            "tensor dimensions must be positive, got " + to_string(shape));
    require(data_.size() == shape_.size(), "tensor data length does not match " + to_string(shape));
  }

  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  int channels() const noexcept { return shape_.channels; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

  T* pixel(int y, int x) noexcept { return data_.data() + index(y, x, 0); }
  const T* pixel(int y, int x) const noexcept { return data_.data() + index(y, x, 0); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(shape_.width) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(shape_.channels) +
           static_cast<std::size_t>(c);
  }

  Shape shape_;
  std::vector<T> data_;
};

// An RGB image in [0,1]; unclamped when produced by the network.
template <typename T>
using BasicImage = Tensor<T>;
using Image = BasicImage<float>;

// Square convolution kernel stored as (k, k, c_in, c_out) plus one bias per output channel.
template <typename T>
struct ConvKernel {
  int size = 3;
  int in_channels = 0;
  int out_channels = 0;
  int dilation = 1;
  std::vector<T> weights;
  std::vector<T> bias;

  ConvKernel() = default;
  ConvKernel(int kernel_size, int in_ch, int out_ch, int dilation_rate = 1);

  T& weight(int i, int j, int c, int o) noexcept { return weights[offset(i, j, c, o)]; }
  const T& weight(int i, int j, int c, int o) const noexcept {
    return weights[offset(i, j, c, o)];
  }
  std::size_t offset(int i, int j, int c, int o) const noexcept {
    return ((static_cast<std::size_t>(i) * size + j) * in_channels + c) * out_channels + o;
  }
  // Zero-fill padding that keeps spatial size.
  int padding() const noexcept { return dilation * (size - 1) / 2; }

  template <typename U>
  ConvKernel<U> cast() const {
    ConvKernel<U> out;
    out.size = size;
    out.in_channels = in_channels;
    out.out_channels = out_channels;
    out.dilation = dilation;
    out.weights.assign(weights.begin(), weights.end());
    out.bias.assign(bias.begin(), bias.end());
    return out;
  }

  friend bool operator==(const ConvKernel&, const ConvKernel&) = default;
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  ConvKernel<T> kernel;  // weight and bias gradients, same layout as the kernel
};

template <typename T>
struct PreluGrads {
  Tensor<T> input;
  std::vector<T> slopes;
};

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvKernel<T>& kernel);

// Gradients of sum(grad_out * conv2d(input, kernel)) with respect to input, weights and bias.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvKernel<T>& kernel,
                             const Tensor<T>& grad_out);

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, std::type_identity_t<std::span<const T>> slopes);

// The subgradient at x == 0 is taken from the identity branch.
template <typename T>
PreluGrads<T> prelu_backward(const Tensor<T>& x, std::type_identity_t<std::span<const T>> slopes,
                             const Tensor<T>& grad_out);

template <typename T>
Tensor<T> global_mean_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> global_mean_pool_backward(const Tensor<T>& grad_out, int height, int width);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

// Inverse of concat_channels; also its gradient routing.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int first_channels);

template <typename T>
Tensor<T> broadcast_spatial(const Tensor<T>& b, int height, int width);

template <typename T>
Tensor<T> broadcast_spatial_backward(const Tensor<T>& grad_out);

}  // namespace uwie
