#include "uwie/network.hpp"

#include <cmath>
#include <random>

namespace uwie {

const char* to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::kernel: return "kernel";
    case ParamKind::bias: return "bias";
    case ParamKind::slope: return "slope";
  }
  return "unknown";
}

std::size_t ParamInfo::count() const {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

namespace {

struct LayerSpec {
  const char* name;
  int kernel;
  int in_channels;
  int out_channels;
  int dilation;
  int prelu_channels;  // 0: no activation follows
};

// clang-format off
constexpr LayerSpec kBackscatterLayers[] = {
    {"backscatter.conv1", 3, 3, 3, 1, 3},
    {"backscatter.conv2", 3, 3, 3, 1, 3},
    {"backscatter.conv3", 1, 3, 3, 1, 3},
    {"backscatter.conv4", 1, 3, 3, 1, 0},
};
constexpr LayerSpec kTransmissionLayers[] = {
    {"transmission.conv1", 3, 6, 8, kTransmissionDilations[0], 8},
    {"transmission.conv2", 3, 8, 8, kTransmissionDilations[1], 8},
    {"transmission.conv3", 3, 8, 8, kTransmissionDilations[2], 8},
    {"transmission.conv4", 3, 8, 3, 1, 0},
};
// clang-format on

std::string prelu_name(const char* conv_name) {
  std::string name(conv_name);
  const auto dot = name.find(".conv");
  return name.substr(0, dot) + ".prelu" + name.substr(dot + 5) + ".slope";
}

void append_layers(std::vector<ParamInfo>& out, const LayerSpec (&layers)[4]) {
  for (const auto& l : layers) {
    out.push_back({std::string(l.name) + ".weight",
                   {l.kernel, l.kernel, l.in_channels, l.out_channels},
                   ParamKind::kernel});
    out.push_back({std::string(l.name) + ".bias", {l.out_channels}, ParamKind::bias});
    if (l.prelu_channels > 0) {
      out.push_back({prelu_name(l.name), {l.prelu_channels}, ParamKind::slope});
    }
  }
}

template <typename T>
ConvKernel<T> make_kernel(const LayerSpec& l) {
  return ConvKernel<T>(l.kernel, l.in_channels, l.out_channels, l.dilation);
}

template <typename Module, typename Buf>
void collect(Module& m, std::vector<Buf>& out) {
  out.emplace_back(m.conv1.weights);
  out.emplace_back(m.conv1.bias);
  out.emplace_back(m.prelu1);
  out.emplace_back(m.conv2.weights);
  out.emplace_back(m.conv2.bias);
  out.emplace_back(m.prelu2);
  out.emplace_back(m.conv3.weights);
  out.emplace_back(m.conv3.bias);
  out.emplace_back(m.prelu3);
  out.emplace_back(m.conv4.weights);
  out.emplace_back(m.conv4.bias);
}

void check_kernel_shape(const char* name, int k, int cin, int cout, int dilation,
                        std::size_t weights, std::size_t bias, const LayerSpec& l) {
  const bool ok = k == l.kernel && cin == l.in_channels && cout == l.out_channels &&
                  dilation == l.dilation &&
                  weights == static_cast<std::size_t>(k) * k * cin * cout &&
                  bias == static_cast<std::size_t>(cout);
  require(ok, std::string("layer ") + name + " has shape " + std::to_string(k) + "x" +
                  std::to_string(k) + "x" + std::to_string(cin) + "x" + std::to_string(cout) +
                  " dilation " + std::to_string(dilation) + ", expected " +
                  std::to_string(l.kernel) + "x" + std::to_string(l.kernel) + "x" +
                  std::to_string(l.in_channels) + "x" + std::to_string(l.out_channels) +
                  " dilation " + std::to_string(l.dilation));
}

template <typename Module>
void validate_module(const Module& m, const LayerSpec (&layers)[4]) {
  const ConvKernel<typename decltype(m.prelu1)::value_type>* convs[] = {&m.conv1, &m.conv2,
                                                                       &m.conv3, &m.conv4};
  const decltype(m.prelu1)* slopes[] = {&m.prelu1, &m.prelu2, &m.prelu3};
  for (int n = 0; n < 4; ++n) {
    const auto& c = *convs[n];
    check_kernel_shape(layers[n].name, c.size, c.in_channels, c.out_channels, c.dilation,
                       c.weights.size(), c.bias.size(), layers[n]);
    if (n < 3) {
      require(slopes[n]->size() == static_cast<std::size_t>(layers[n].prelu_channels),
              "layer " + prelu_name(layers[n].name) + " has " +
                  std::to_string(slopes[n]->size()) + " slopes, expected " +
                  std::to_string(layers[n].prelu_channels));
    }
  }
}

template <typename T>
void backscatter_forward(const BasicImage<T>& image, const BackscatterParams<T>& p,
                         ForwardCache<T>& cache) {
  cache.bs_pre1 = conv2d(image, p.conv1);
  cache.bs_act1 = prelu(cache.bs_pre1, p.prelu1);
  cache.bs_pre2 = conv2d(cache.bs_act1, p.conv2);
  cache.bs_act2 = prelu(cache.bs_pre2, p.prelu2);
  cache.bs_pooled = global_mean_pool(cache.bs_act2);
  cache.bs_pre3 = conv2d(cache.bs_pooled, p.conv3);
  cache.bs_act3 = prelu(cache.bs_pre3, p.prelu3);
  cache.ambient = AmbientLight<T>::from_tensor(conv2d(cache.bs_act3, p.conv4));
}

template <typename T>
void transmission_forward(const BasicImage<T>& image, const AmbientLight<T>& ambient,
                          const TransmissionParams<T>& p, ForwardCache<T>& cache) {
  cache.tr_input =
      concat_channels(image, broadcast_spatial(ambient.as_tensor(), image.height(), image.width()));
  cache.tr_pre1 = conv2d(cache.tr_input, p.conv1);
  cache.tr_act1 = prelu(cache.tr_pre1, p.prelu1);
  cache.tr_pre2 = conv2d(cache.tr_act1, p.conv2);
  cache.tr_act2 = prelu(cache.tr_pre2, p.prelu2);
  cache.tr_pre3 = conv2d(cache.tr_act2, p.conv3);
  cache.tr_act3 = prelu(cache.tr_pre3, p.prelu3);
  cache.t_inv = conv2d(cache.tr_act3, p.conv4);
}

template <typename T>
void require_rgb_input(const BasicImage<T>& image, const char* what) {
  require(image.channels() == 3, std::string(what) + ": expected a 3-channel image, got " +
                                     to_string(image.shape()));
}

}  // namespace

const std::vector<ParamInfo>& architecture_manifest() {
  static const std::vector<ParamInfo> manifest = [] {
    std::vector<ParamInfo> out;
    append_layers(out, kBackscatterLayers);
    append_layers(out, kTransmissionLayers);
    return out;
  }();
  return manifest;
}

std::size_t architecture_parameter_count() {
  std::size_t n = 0;
  for (const auto& info : architecture_manifest()) n += info.count();
  return n;
}

template <typename T>
NetworkParams<T> NetworkParams<T>::zeros() {
  NetworkParams<T> p;
  auto& bs = p.backscatter;
  bs.conv1 = make_kernel<T>(kBackscatterLayers[0]);
  bs.conv2 = make_kernel<T>(kBackscatterLayers[1]);
  bs.conv3 = make_kernel<T>(kBackscatterLayers[2]);
  bs.conv4 = make_kernel<T>(kBackscatterLayers[3]);
  bs.prelu1.assign(3, T{0});
  bs.prelu2.assign(3, T{0});
  bs.prelu3.assign(3, T{0});
  auto& tr = p.transmission;
  tr.conv1 = make_kernel<T>(kTransmissionLayers[0]);
  tr.conv2 = make_kernel<T>(kTransmissionLayers[1]);
  tr.conv3 = make_kernel<T>(kTransmissionLayers[2]);
  tr.conv4 = make_kernel<T>(kTransmissionLayers[3]);
  tr.prelu1.assign(8, T{0});
  tr.prelu2.assign(8, T{0});
  tr.prelu3.assign(8, T{0});
  return p;
}

template <typename T>
std::vector<std::span<T>> NetworkParams<T>::buffers() {
  std::vector<std::span<T>> out;
  out.reserve(architecture_manifest().size());
  collect(backscatter, out);
  collect(transmission, out);
  return out;
}

template <typename T>
std::vector<std::span<const T>> NetworkParams<T>::buffers() const {
  std::vector<std::span<const T>> out;
  out.reserve(architecture_manifest().size());
  collect(backscatter, out);
  collect(transmission, out);
  return out;
}

template <typename T>
std::size_t NetworkParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : buffers()) n += b.size();
  return n;
}

template <typename T>
void NetworkParams<T>::validate() const {
  validate_module(backscatter, kBackscatterLayers);
  validate_module(transmission, kTransmissionLayers);
  require(parameter_count() == architecture_parameter_count(),
          "parameter count does not match the architecture");
}

NetworkParams<float> init_params(std::uint64_t seed) {
  auto params = NetworkParams<float>::zeros();
  std::mt19937_64 rng(seed);
  const double a = kInitialPreluSlope;
  auto init_conv = [&](ConvKernel<float>& k) {
    const double fan_in = static_cast<double>(k.size) * k.size * k.in_channels;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / ((1.0 + a * a) * fan_in)));
    for (auto& w : k.weights) w = static_cast<float>(dist(rng));
  };
  for (auto* module_convs :
       {&params.backscatter.conv1, &params.backscatter.conv2, &params.backscatter.conv3,
        &params.backscatter.conv4, &params.transmission.conv1, &params.transmission.conv2,
        &params.transmission.conv3, &params.transmission.conv4}) {
    init_conv(*module_convs);
  }
  for (auto* slopes : {&params.backscatter.prelu1, &params.backscatter.prelu2,
                       &params.backscatter.prelu3, &params.transmission.prelu1,
                       &params.transmission.prelu2, &params.transmission.prelu3}) {
    std::fill(slopes->begin(), slopes->end(), kInitialPreluSlope);
  }
  return params;
}

template <typename T>
AmbientLight<T> estimate_backscatter(const BasicImage<T>& image, const NetworkParams<T>& params) {
  require_rgb_input(image, "estimate_backscatter");
  ForwardCache<T> cache;
  backscatter_forward(image, params.backscatter, cache);
  return cache.ambient;
}

template <typename T>
TransmissionMap<T> estimate_direct_transmission(const BasicImage<T>& image,
                                                const AmbientLight<T>& ambient,
                                                const NetworkParams<T>& params) {
  require_rgb_input(image, "estimate_direct_transmission");
  ForwardCache<T> cache;
  transmission_forward(image, ambient, params.transmission, cache);
  return std::move(cache.t_inv);
}

template <typename T>
ForwardResult<T> forward(const BasicImage<T>& image, const NetworkParams<T>& params,
                         OutputHead head) {
  require_rgb_input(image, "forward");
  ForwardResult<T> result;
  auto& cache = result.cache;
  cache.head = head;
  cache.input = image;
  backscatter_forward(image, params.backscatter, cache);
  transmission_forward(image, cache.ambient, params.transmission, cache);
  result.enhanced = head == OutputHead::physical ? reconstruct(image, cache.ambient, cache.t_inv)
                                                 : cache.t_inv;
  return result;
}

template <typename T>
ParamGrads<T> backward(const ForwardCache<T>& cache, const Tensor<T>& grad_enhanced,
                       const NetworkParams<T>& params) {
  const auto& input = cache.input;
  require(!input.empty() && !cache.t_inv.empty() && !cache.tr_act3.empty() &&
              !cache.bs_act3.empty(),
          "backward: forward cache is incomplete");
  require(grad_enhanced.shape() == input.shape(),
          "backward: gradient shape " + to_string(grad_enhanced.shape()) +
              " does not match enhanced image " + to_string(input.shape()));
  require(cache.tr_act3.channels() == params.transmission.conv4.in_channels &&
              cache.tr_input.channels() == params.transmission.conv1.in_channels &&
              cache.bs_act3.channels() == params.backscatter.conv4.in_channels &&
              cache.t_inv.shape() == input.shape(),
          "backward: forward cache is inconsistent with the parameters");

  auto grads = ParamGrads<T>::zeros();
  const auto& tp = params.transmission;
  const auto& bp = params.backscatter;

  Tensor<T> grad_t_inv;
  AmbientLight<T> grad_ambient{};
  if (cache.head == OutputHead::physical) {
    auto r = reconstruct_backward(input, cache.ambient, cache.t_inv, grad_enhanced);
    grad_t_inv = std::move(r.t_inv);
    grad_ambient = r.ambient;
  } else {
    grad_t_inv = grad_enhanced;
  }

  auto& tg = grads.transmission;
  auto c4 = conv2d_backward(cache.tr_act3, tp.conv4, grad_t_inv);
  tg.conv4 = std::move(c4.kernel);
  auto p3 = prelu_backward(cache.tr_pre3, tp.prelu3, c4.input);
  tg.prelu3 = std::move(p3.slopes);
  auto c3 = conv2d_backward(cache.tr_act2, tp.conv3, p3.input);
  tg.conv3 = std::move(c3.kernel);
  auto p2 = prelu_backward(cache.tr_pre2, tp.prelu2, c3.input);
  tg.prelu2 = std::move(p2.slopes);
  auto c2 = conv2d_backward(cache.tr_act1, tp.conv2, p2.input);
  tg.conv2 = std::move(c2.kernel);
  auto p1 = prelu_backward(cache.tr_pre1, tp.prelu1, c2.input);
  tg.prelu1 = std::move(p1.slopes);
  auto c1 = conv2d_backward(cache.tr_input, tp.conv1, p1.input);
  tg.conv1 = std::move(c1.kernel);

  // The broadcast ambient channels feed the transmission estimator too.
  const auto routed = split_channels(c1.input, input.channels());
  const auto from_concat = broadcast_spatial_backward(routed.second);
  for (int c = 0; c < 3; ++c) grad_ambient.rgb[c] += from_concat(0, 0, c);

  auto& bg = grads.backscatter;
  auto b4 = conv2d_backward(cache.bs_act3, bp.conv4, grad_ambient.as_tensor());
  bg.conv4 = std::move(b4.kernel);
  auto q3 = prelu_backward(cache.bs_pre3, bp.prelu3, b4.input);
  bg.prelu3 = std::move(q3.slopes);
  auto b3 = conv2d_backward(cache.bs_pooled, bp.conv3, q3.input);
  bg.conv3 = std::move(b3.kernel);
  auto pooled = global_mean_pool_backward(b3.input, input.height(), input.width());
  auto q2 = prelu_backward(cache.bs_pre2, bp.prelu2, pooled);
  bg.prelu2 = std::move(q2.slopes);
  auto b2 = conv2d_backward(cache.bs_act1, bp.conv2, q2.input);
  bg.conv2 = std::move(b2.kernel);
  auto q1 = prelu_backward(cache.bs_pre1, bp.prelu1, b2.input);
  bg.prelu1 = std::move(q1.slopes);
  auto b1 = conv2d_backward(input, bp.conv1, q1.input);
  bg.conv1 = std::move(b1.kernel);
  return grads;
}

#define UWIE_INSTANTIATE_NETWORK(T)                                                        \
  template struct NetworkParams<T>;                                                        \
  template AmbientLight<T> estimate_backscatter(const BasicImage<T>&,                      \
                                                const NetworkParams<T>&);                  \
  template TransmissionMap<T> estimate_direct_transmission(                                \
      const BasicImage<T>&, const AmbientLight<T>&, const NetworkParams<T>&);              \
  template ForwardResult<T> forward(const BasicImage<T>&, const NetworkParams<T>&,         \
                                    OutputHead);                                           \
  template ParamGrads<T> backward(const ForwardCache<T>&, const Tensor<T>&,                \
                                  const NetworkParams<T>&);

UWIE_INSTANTIATE_NETWORK(float)
UWIE_INSTANTIATE_NETWORK(double)

#undef UWIE_INSTANTIATE_NETWORK

}  // namespace uwie
