#include "uwie/tensor.hpp"

#include <algorithm>

namespace uwie {

std::string to_string(const Shape& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
         std::to_string(shape.channels);
}

template <typename T>
ConvKernel<T>::ConvKernel(int kernel_size, int in_ch, int out_ch, int dilation_rate)
    : size(kernel_size), in_channels(in_ch), out_channels(out_ch), dilation(dilation_rate) {
  require(kernel_size > 0 && kernel_size % 2 == 1, "kernel size must be odd");
  require(in_ch > 0 && out_ch > 0, "kernel channel counts must be positive");
  require(dilation_rate >= 1, "dilation must be >= 1");
  require(dilation_rate == 1 || kernel_size == 3, "dilation > 1 requires a 3x3 kernel");
  weights.assign(static_cast<std::size_t>(kernel_size) * kernel_size * in_ch * out_ch, T{0});
  bias.assign(static_cast<std::size_t>(out_ch), T{0});
}

namespace {

template <typename T>
void check_kernel(const Tensor<T>& input, const ConvKernel<T>& kernel) {
  require(kernel.dilation >= 1, "conv2d: dilation must be positive, got " +
                                    std::to_string(kernel.dilation));
  require(kernel.size > 0 && kernel.size % 2 == 1, "conv2d: kernel size must be odd");
  require(kernel.in_channels == input.channels(),
          "conv2d: kernel expects " + std::to_string(kernel.in_channels) +
              " input channels, tensor has " + std::to_string(input.channels()));
  require(kernel.weights.size() == static_cast<std::size_t>(kernel.size) * kernel.size *
                                       kernel.in_channels * kernel.out_channels,
          "conv2d: weight buffer does not match kernel shape");
  require(kernel.bias.size() == static_cast<std::size_t>(kernel.out_channels),
          "conv2d: bias length does not match output channels");
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvKernel<T>& kernel) {
  check_kernel(input, kernel);
  const int h = input.height();
  const int w = input.width();
  const int cin = kernel.in_channels;
  const int cout = kernel.out_channels;
  const int k = kernel.size;
  const int half = k / 2;
  const int dil = kernel.dilation;

  Tensor<T> out(h, w, cout);
  std::vector<T> acc(static_cast<std::size_t>(cout));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::copy(kernel.bias.begin(), kernel.bias.end(), acc.begin());
      for (int i = 0; i < k; ++i) {
        const int yy = y + dil * (i - half);
        if (yy < 0 || yy >= h) continue;
        for (int j = 0; j < k; ++j) {
          const int xx = x + dil * (j - half);
          if (xx < 0 || xx >= w) continue;
          const T* px = input.pixel(yy, xx);
          const T* wk = kernel.weights.data() + kernel.offset(i, j, 0, 0);
          for (int c = 0; c < cin; ++c) {
            const T v = px[c];
            const T* wc = wk + static_cast<std::size_t>(c) * cout;
            for (int o = 0; o < cout; ++o) acc[o] += wc[o] * v;
          }
        }
      }
      std::copy(acc.begin(), acc.end(), out.pixel(y, x));
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvKernel<T>& kernel,
                             const Tensor<T>& grad_out) {
  check_kernel(input, kernel);
  require(grad_out.height() == input.height() && grad_out.width() == input.width() &&
              grad_out.channels() == kernel.out_channels,
          "conv2d_backward: upstream gradient shape " + to_string(grad_out.shape()) +
              " does not match output shape");
  const int h = input.height();
  const int w = input.width();
  const int cin = kernel.in_channels;
  const int cout = kernel.out_channels;
  const int k = kernel.size;
  const int half = k / 2;
  const int dil = kernel.dilation;

  ConvGrads<T> grads{Tensor<T>(h, w, cin), ConvKernel<T>(k, cin, cout, dil)};
  T* gw_base = grads.kernel.weights.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T* g = grad_out.pixel(y, x);
      for (int o = 0; o < cout; ++o) grads.kernel.bias[o] += g[o];
      for (int i = 0; i < k; ++i) {
        const int yy = y + dil * (i - half);
        if (yy < 0 || yy >= h) continue;
        for (int j = 0; j < k; ++j) {
          const int xx = x + dil * (j - half);
          if (xx < 0 || xx >= w) continue;
          const T* px = input.pixel(yy, xx);
          T* gin = grads.input.pixel(yy, xx);
          const std::size_t base = kernel.offset(i, j, 0, 0);
          const T* wk = kernel.weights.data() + base;
          T* gw = gw_base + base;
          for (int c = 0; c < cin; ++c) {
            const T v = px[c];
            const T* wc = wk + static_cast<std::size_t>(c) * cout;
            T* gwc = gw + static_cast<std::size_t>(c) * cout;
            T s{0};
            for (int o = 0; o < cout; ++o) {
              gwc[o] += v * g[o];
              s += wc[o] * g[o];
            }
            gin[c] += s;
          }
        }
      }
    }
  }
  return grads;
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, std::type_identity_t<std::span<const T>> slopes) {
  require(slopes.size() == static_cast<std::size_t>(x.channels()),
          "prelu: " + std::to_string(slopes.size()) + " slopes for " +
              std::to_string(x.channels()) + " channels");
  Tensor<T> out = x;
  auto data = out.data();
  const std::size_t c = slopes.size();
  for (std::size_t n = 0; n < data.size(); ++n) {
    if (data[n] < T{0}) data[n] *= slopes[n % c];
  }
  return out;
}

template <typename T>
PreluGrads<T> prelu_backward(const Tensor<T>& x, std::type_identity_t<std::span<const T>> slopes,
                             const Tensor<T>& grad_out) {
  require(slopes.size() == static_cast<std::size_t>(x.channels()),
          "prelu_backward: slope count does not match channels");
  require(grad_out.shape() == x.shape(), "prelu_backward: upstream gradient shape mismatch");
  PreluGrads<T> grads{Tensor<T>(x.height(), x.width(), x.channels()),
                      std::vector<T>(slopes.size(), T{0})};
  const auto in = x.data();
  const auto g = grad_out.data();
  auto gin = grads.input.data();
  const std::size_t c = slopes.size();
  for (std::size_t n = 0; n < in.size(); ++n) {
    const std::size_t ch = n % c;
    if (in[n] >= T{0}) {
      gin[n] = g[n];
    } else {
      gin[n] = slopes[ch] * g[n];
      grads.slopes[ch] += in[n] * g[n];
    }
  }
  return grads;
}

template <typename T>
Tensor<T> global_mean_pool(const Tensor<T>& x) {
  require(!x.empty(), "global_mean_pool: empty tensor");
  const int c = x.channels();
  std::vector<T> sums(static_cast<std::size_t>(c), T{0});
  const auto data = x.data();
  for (std::size_t n = 0; n < data.size(); ++n) sums[n % c] += data[n];
  const T count = static_cast<T>(x.height()) * static_cast<T>(x.width());
  for (auto& s : sums) s /= count;
  return Tensor<T>(Shape{1, 1, c}, std::move(sums));
}

template <typename T>
Tensor<T> global_mean_pool_backward(const Tensor<T>& grad_out, int height, int width) {
  require(grad_out.height() == 1 && grad_out.width() == 1,
          "global_mean_pool_backward: upstream gradient must be 1x1xC");
  require(height > 0 && width > 0, "global_mean_pool_backward: non-positive spatial size");
  const T count = static_cast<T>(height) * static_cast<T>(width);
  Tensor<T> out(height, width, grad_out.channels());
  auto data = out.data();
  const int c = grad_out.channels();
  for (std::size_t n = 0; n < data.size(); ++n) data[n] = grad_out(0, 0, n % c) / count;
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.height() == b.height() && a.width() == b.width(),
          "concat_channels: spatial mismatch " + to_string(a.shape()) + " vs " +
              to_string(b.shape()));
  const int ca = a.channels();
  const int cb = b.channels();
  Tensor<T> out(a.height(), a.width(), ca + cb);
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      T* dst = out.pixel(y, x);
      std::copy_n(a.pixel(y, x), ca, dst);
      std::copy_n(b.pixel(y, x), cb, dst + ca);
    }
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int first_channels) {
  require(first_channels > 0 && first_channels < x.channels(),
          "split_channels: split point outside channel range");
  const int ca = first_channels;
  const int cb = x.channels() - first_channels;
  Tensor<T> a(x.height(), x.width(), ca);
  Tensor<T> b(x.height(), x.width(), cb);
  for (int y = 0; y < x.height(); ++y) {
    for (int xx = 0; xx < x.width(); ++xx) {
      const T* src = x.pixel(y, xx);
      std::copy_n(src, ca, a.pixel(y, xx));
      std::copy_n(src + ca, cb, b.pixel(y, xx));
    }
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
Tensor<T> broadcast_spatial(const Tensor<T>& b, int height, int width) {
  require(b.height() == 1 && b.width() == 1, "broadcast_spatial: source must be 1x1xC");
  require(height >= 1 && width >= 1, "broadcast_spatial: target dims must be positive");
  Tensor<T> out(height, width, b.channels());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) std::copy_n(b.pixel(0, 0), b.channels(), out.pixel(y, x));
  return out;
}

template <typename T>
Tensor<T> broadcast_spatial_backward(const Tensor<T>& grad_out) {
  const int c = grad_out.channels();
  std::vector<T> sums(static_cast<std::size_t>(c), T{0});
  const auto data = grad_out.data();
  for (std::size_t n = 0; n < data.size(); ++n) sums[n % c] += data[n];
  return Tensor<T>(Shape{1, 1, c}, std::move(sums));
}

#define UWIE_INSTANTIATE_TENSOR_OPS(T)                                                   \
  template struct ConvKernel<T>;                                                         \
  template Tensor<T> conv2d(const Tensor<T>&, const ConvKernel<T>&);                     \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const ConvKernel<T>&,          \
                                        const Tensor<T>&);                               \
  template Tensor<T> prelu(const Tensor<T>&, std::type_identity_t<std::span<const T>>);  \
  template PreluGrads<T> prelu_backward(const Tensor<T>&,                                 \
                                        std::type_identity_t<std::span<const T>>,        \
                                        const Tensor<T>&);                               \
  template Tensor<T> global_mean_pool(const Tensor<T>&);                                 \
  template Tensor<T> global_mean_pool_backward(const Tensor<T>&, int, int);              \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                \
  template std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>&, int);        \
  template Tensor<T> broadcast_spatial(const Tensor<T>&, int, int);                      \
  template Tensor<T> broadcast_spatial_backward(const Tensor<T>&);

UWIE_INSTANTIATE_TENSOR_OPS(float)
UWIE_INSTANTIATE_TENSOR_OPS(double)

#undef UWIE_INSTANTIATE_TENSOR_OPS

}  // namespace uwie
