#include "cdae/layers.hpp"

#include <cmath>

#include "cdae/errors.hpp"

namespace cdae::nn {

namespace {

void require_chw(const Tensor& t, const char* context) {
  if (t.rank() != 3) {
    throw ShapeError(std::string(context) + ": expected [C,H,W], got " + to_string(t.shape()));
  }
}

void require_even_plane(const Shape& s, const char* context) {
  if (s[1] % 2 != 0 || s[2] % 2 != 0) {
    throw ShapeError(std::string(context) + ": spatial extents must be even, got " + to_string(s));
  }
}

}  // namespace

ConvLayer::ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_size_(kernel_size) {
  if (kernel_size % 2 == 0) {
    throw ConfigError("kernel size must be odd, got " + std::to_string(kernel_size));
  }
  weights_ = Tensor::zeros({out_channels, in_channels, kernel_size, kernel_size});
  bias_ = Tensor::zeros({out_channels});
}

void ConvLayer::init_uniform(Rng& rng) {
  const double k2 = static_cast<double>(kernel_size_ * kernel_size_);
  const double fan_in = static_cast<double>(in_channels_) * k2;
  const double fan_out = static_cast<double>(out_channels_) * k2;
  const double s = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& w : weights_.values()) w = rng.uniform(-s, s);
  bias_.fill(0.0);
  ++revision_;
}

void ConvLayer::apply_gradient(const Tensor& grad_weights, const Tensor& grad_bias, double lr) {
  axpy(-lr, grad_weights, weights_);
  axpy(-lr, grad_bias, bias_);
  ++revision_;
}

ConvForward conv_forward(const ConvLayer& layer, const Tensor& input, Exec exec) {
  require_chw(input, "conv_forward");
  if (input.extent(0) != layer.in_channels()) {
    throw ShapeError("conv_forward: layer expects " + std::to_string(layer.in_channels()) +
                     " channels, input has " + std::to_string(input.extent(0)));
  }
  const auto d = layer.dims(input.extent(1), input.extent(2));
  ConvForward fwd{Tensor::zeros({d.out_channels, d.height, d.width}),
                  ConvCache{&layer, layer.revision(), 0, input}};
  kernels::conv2d_forward(exec, d, input.values(), layer.weights().values(), layer.bias().values(),
                          fwd.output.values());
  return fwd;
}

namespace {

void check_cache(const ConvCache& cache, const void* layer, std::uint64_t revision,
                 std::uint64_t source_revision, const char* context) {
  if (cache.layer == nullptr || cache.input.empty()) {
    throw UsageError(std::string(context) + ": missing forward cache");
  }
  if (cache.layer != layer || cache.revision != revision ||
      cache.source_revision != source_revision) {
    throw UsageError(std::string(context) + ": stale forward cache (weights changed since forward)");
  }
}

void check_grad_shape(const kernels::ConvDims& d, const Tensor& grad_output, const char* context) {
  const Shape expected{d.out_channels, d.height, d.width};
  if (grad_output.shape() != expected) {
    throw ShapeError(std::string(context) + ": grad_output " + to_string(grad_output.shape()) +
                     " does not match forward output " + to_string(expected));
  }
}

ConvGradients conv_backward_with(const kernels::ConvDims& d, std::span<const double> weights,
                                 const Tensor& input, const Tensor& grad_output, Exec exec) {
  ConvGradients g{Tensor::zeros({d.in_channels, d.height, d.width}),
                  Tensor::zeros({d.out_channels, d.in_channels, d.kernel, d.kernel}),
                  Tensor::zeros({d.out_channels})};
  kernels::conv2d_backward_input(exec, d, grad_output.values(), weights, g.input.values());
  kernels::conv2d_backward_weights(exec, d, input.values(), grad_output.values(), g.weights.values(),
                                   g.bias.values());
  return g;
}

}  // namespace

ConvGradients conv_backward(const ConvLayer& layer, const ConvCache& cache,
                            const Tensor& grad_output, Exec exec) {
  check_cache(cache, &layer, layer.revision(), 0, "conv_backward");
  const auto d = layer.dims(cache.input.extent(1), cache.input.extent(2));
  check_grad_shape(d, grad_output, "conv_backward");
  return conv_backward_with(d, layer.weights().values(), cache.input, grad_output, exec);
}

Tensor transpose_flip(const Tensor& weights) {
  if (weights.rank() != 4 || weights.extent(2) != weights.extent(3)) {
    throw ShapeError("transpose_flip: expected [F,C,k,k], got " + to_string(weights.shape()));
  }
  const std::size_t F = weights.extent(0), C = weights.extent(1), K = weights.extent(2);
  Tensor out = Tensor::zeros({C, F, K, K});
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t dy = 0; dy < K; ++dy)
        for (std::size_t dx = 0; dx < K; ++dx)
          out[((c * F + f) * K + (K - 1 - dy)) * K + (K - 1 - dx)] =
              weights[((f * C + c) * K + dy) * K + dx];
  return out;
}

DeconvLayer DeconvLayer::learned(std::size_t in_channels, std::size_t out_channels,
                                 std::size_t kernel_size) {
  return DeconvLayer(Mode::kLearned, ConvLayer(in_channels, out_channels, kernel_size));
}

DeconvLayer DeconvLayer::tied_to(const ConvLayer& source) {
  return DeconvLayer(Mode::kTied,
                     ConvLayer(source.out_channels(), source.in_channels(), source.kernel_size()));
}

namespace {

const ConvLayer& require_source(const DeconvLayer& layer, const ConvLayer* source,
                                const char* context) {
  if (source == nullptr) throw UsageError(std::string(context) + ": tied deconv needs its source layer");
  if (source->in_channels() != layer.out_channels() ||
      source->out_channels() != layer.in_channels() ||
      source->kernel_size() != layer.kernel_size()) {
    throw ShapeError(std::string(context) + ": tied source layer has incompatible shape");
  }
  return *source;
}

}  // namespace

Tensor DeconvLayer::effective_weights(const ConvLayer* source) const {
  if (!tied()) return own_.weights();
  return transpose_flip(require_source(*this, source, "effective_weights").weights());
}

ConvForward deconv_forward(const DeconvLayer& layer, const ConvLayer* source, const Tensor& input,
                           Exec exec) {
  if (!layer.tied()) return conv_forward(layer.own(), input, exec);
  require_chw(input, "deconv_forward");
  const ConvLayer& src = require_source(layer, source, "deconv_forward");
  if (input.extent(0) != layer.in_channels()) {
    throw ShapeError("deconv_forward: layer expects " + std::to_string(layer.in_channels()) +
                     " channels, input has " + std::to_string(input.extent(0)));
  }
  const auto d = layer.own().dims(input.extent(1), input.extent(2));
  const Tensor w = transpose_flip(src.weights());
  ConvForward fwd{Tensor::zeros({d.out_channels, d.height, d.width}),
                  ConvCache{&layer.own(), layer.own().revision(), src.revision(), input}};
  kernels::conv2d_forward(exec, d, input.values(), w.values(), layer.own().bias().values(),
                          fwd.output.values());
  return fwd;
}

DeconvGradients deconv_backward(const DeconvLayer& layer, const ConvLayer* source,
                                const ConvCache& cache, const Tensor& grad_output, Exec exec) {
  if (!layer.tied()) {
    auto g = conv_backward(layer.own(), cache, grad_output, exec);
    return {std::move(g.input), std::move(g.weights), std::move(g.bias)};
  }
  const ConvLayer& src = require_source(layer, source, "deconv_backward");
  check_cache(cache, &layer.own(), layer.own().revision(), src.revision(), "deconv_backward");
  const auto d = layer.own().dims(cache.input.extent(1), cache.input.extent(2));
  check_grad_shape(d, grad_output, "deconv_backward");
  const Tensor w = transpose_flip(src.weights());
  auto g = conv_backward_with(d, w.values(), cache.input, grad_output, exec);
  return {std::move(g.input), transpose_flip(g.weights), std::move(g.bias)};
}

PoolForward maxpool2x2_forward(const Tensor& input, Exec exec) {
  require_chw(input, "maxpool2x2_forward");
  require_even_plane(input.shape(), "maxpool2x2_forward");
  const kernels::PlaneDims d{input.extent(0), input.extent(1), input.extent(2)};
  PoolForward fwd{Tensor::zeros({d.channels, d.height / 2, d.width / 2}),
                  PoolSwitches{input.shape(), std::vector<std::uint8_t>(d.half_size())}};
  kernels::maxpool2x2_forward(exec, d, input.values(), fwd.output.values(), fwd.switches.codes);
  return fwd;
}

Tensor maxpool2x2_backward(const PoolSwitches& switches, const Tensor& grad_output, Exec exec) {
  const Shape& in = switches.input_shape;
  if (in.size() != 3 || switches.codes.empty()) throw UsageError("maxpool2x2_backward: missing switches");
  const Shape expected{in[0], in[1] / 2, in[2] / 2};
  if (grad_output.shape() != expected) {
    throw ShapeError("maxpool2x2_backward: grad_output " + to_string(grad_output.shape()) +
                     " does not match pooled shape " + to_string(expected));
  }
  const kernels::PlaneDims d{in[0], in[1], in[2]};
  Tensor grad_input = Tensor::zeros(in);
  kernels::maxpool2x2_backward(exec, d, switches.codes, grad_output.values(), grad_input.values());
  return grad_input;
}

Tensor unpool2x2_forward(const Tensor& input, Exec exec) {
  require_chw(input, "unpool2x2_forward");
  const kernels::PlaneDims d{input.extent(0), 2 * input.extent(1), 2 * input.extent(2)};
  Tensor out = Tensor::zeros({d.channels, d.height, d.width});
  kernels::unpool2x2_forward(exec, d, input.values(), out.values());
  return out;
}

Tensor unpool2x2_backward(const Tensor& grad_output, Exec exec) {
  require_chw(grad_output, "unpool2x2_backward");
  require_even_plane(grad_output.shape(), "unpool2x2_backward");
  const kernels::PlaneDims d{grad_output.extent(0), grad_output.extent(1), grad_output.extent(2)};
  Tensor grad_input = Tensor::zeros({d.channels, d.height / 2, d.width / 2});
  kernels::unpool2x2_backward(exec, d, grad_output.values(), grad_input.values());
  return grad_input;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& output, const Tensor& grad_output) {
  require_same_shape(output, grad_output, "relu_backward");
  Tensor g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(output[i] > 0.0)) g[i] = 0.0;
  }
  return g;
}

Tensor tanh(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = std::tanh(v);
  return y;
}

Tensor tanh_backward(const Tensor& output, const Tensor& grad_output) {
  require_same_shape(output, grad_output, "tanh_backward");
  Tensor g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - output[i] * output[i];
  return g;
}

ActivationCache activation_forward(Activation kind, const Tensor& x) {
  return {kind, kind == Activation::kRelu ? relu(x) : tanh(x)};
}

Tensor activation_backward(const ActivationCache& cache, const Tensor& grad_output) {
  return cache.kind == Activation::kRelu ? relu_backward(cache.output, grad_output)
                                         : tanh_backward(cache.output, grad_output);
}

}  // namespace cdae::nn
