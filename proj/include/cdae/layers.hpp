#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cdae/kernels.hpp"
#include "cdae/rng.hpp"
#include "cdae/tensor.hpp"

namespace cdae::nn {

using kernels::Exec;

/// Stride-1, zero "same"-padded convolution with an odd square kernel.
///
/// Weights are [out, in, k, k], bias is [out]. Every mutation bumps revision(),
/// which lets backward passes reject caches recorded against older weights.
class ConvLayer {
 public:
  ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size = 3);

  std::size_t in_channels() const noexcept { return in_channels_; }
  std::size_t out_channels() const noexcept { return out_channels_; }
  std::size_t kernel_size() const noexcept { return kernel_size_; }
  std::uint64_t revision() const noexcept { return revision_; }

  const Tensor& weights() const noexcept { return weights_; }
  const Tensor& bias() const noexcept { return bias_; }
  Tensor& mutable_weights() noexcept { ++revision_; return weights_; }
  Tensor& mutable_bias() noexcept { ++revision_; return bias_; }

  /// Uniform in [-s, s], s = sqrt(6 / (fan_in + fan_out)); bias zeroed.
  void init_uniform(Rng& rng);

  /// w <- w - lr * grad_w, b <- b - lr * grad_b.
  void apply_gradient(const Tensor& grad_weights, const Tensor& grad_bias, double lr);

  kernels::ConvDims dims(std::size_t height, std::size_t width) const {
    return {in_channels_, out_channels_, height, width, kernel_size_};
  }

 private:
  std::size_t in_channels_;
  std::size_t out_channels_;
  std::size_t kernel_size_;
  Tensor weights_;
  Tensor bias_;
  std::uint64_t revision_ = 0;
};

struct ConvCache {
  const void* layer = nullptr;
  std::uint64_t revision = 0;
  std::uint64_t source_revision = 0;
  Tensor input;
};

struct ConvGradients {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

struct ConvForward {
  Tensor output;
  ConvCache cache;
};

ConvForward conv_forward(const ConvLayer& layer, const Tensor& input, Exec exec = Exec::kSerial);
ConvGradients conv_backward(const ConvLayer& layer, const ConvCache& cache,
                            const Tensor& grad_output, Exec exec = Exec::kSerial);

/// Maps a [F, C, k, k] kernel bank onto its transposed, spatially flipped
/// [C, F, k, k] counterpart. The map is an involution.
Tensor transpose_flip(const Tensor& weights);

/// Deconvolution (stride 1, same padding, so a convolution). In tied mode the
/// effective weights are transpose_flip(source.weights()) and only the bias is
/// owned by the deconv layer.
class DeconvLayer {
 public:
  enum class Mode { kLearned, kTied };

  static DeconvLayer learned(std::size_t in_channels, std::size_t out_channels,
                             std::size_t kernel_size = 3);
  static DeconvLayer tied_to(const ConvLayer& source);

  Mode mode() const noexcept { return mode_; }
  bool tied() const noexcept { return mode_ == Mode::kTied; }
  std::size_t in_channels() const noexcept { return own_.in_channels(); }
  std::size_t out_channels() const noexcept { return own_.out_channels(); }
  std::size_t kernel_size() const noexcept { return own_.kernel_size(); }

  /// Parameter holder. In tied mode its weight tensor is unused and stays zero.
  const ConvLayer& own() const noexcept { return own_; }
  ConvLayer& own() noexcept { return own_; }

  /// Weights actually applied; `source` is required in tied mode and ignored otherwise.
  Tensor effective_weights(const ConvLayer* source) const;

 private:
  DeconvLayer(Mode mode, ConvLayer own) : mode_(mode), own_(std::move(own)) {}

  Mode mode_;
  ConvLayer own_;
};

struct DeconvGradients {
  Tensor input;
  /// Learned mode: gradient of own weights. Tied mode: gradient already folded
  /// back into the source layer's [out, in, k, k] layout.
  Tensor weights;
  Tensor bias;
};

ConvForward deconv_forward(const DeconvLayer& layer, const ConvLayer* source, const Tensor& input,
                           Exec exec = Exec::kSerial);
DeconvGradients deconv_backward(const DeconvLayer& layer, const ConvLayer* source,
                                const ConvCache& cache, const Tensor& grad_output,
                                Exec exec = Exec::kSerial);

/// Argmax of each 2x2 block, encoded as row * 2 + col.
struct PoolSwitches {
  Shape input_shape;
  std::vector<std::uint8_t> codes;

  std::pair<int, int> offset(std::size_t cell) const {
    return {codes.at(cell) >> 1, codes.at(cell) & 1};
  }
};

struct PoolForward {
  Tensor output;
  PoolSwitches switches;
};

/// Ties resolve to the first maximum in row-major order.
PoolForward maxpool2x2_forward(const Tensor& input, Exec exec = Exec::kSerial);
Tensor maxpool2x2_backward(const PoolSwitches& switches, const Tensor& grad_output,
                           Exec exec = Exec::kSerial);

/// Duplicates every value into its 2x2 block; no switches.
Tensor unpool2x2_forward(const Tensor& input, Exec exec = Exec::kSerial);
/// Adjoint of duplication: block sum.
Tensor unpool2x2_backward(const Tensor& grad_output, Exec exec = Exec::kSerial);

enum class Activation { kRelu, kTanh };

/// Output of the activation; both derivatives are expressible from it.
struct ActivationCache {
  Activation kind;
  Tensor output;
};

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& output, const Tensor& grad_output);
Tensor tanh(const Tensor& x);
Tensor tanh_backward(const Tensor& output, const Tensor& grad_output);

ActivationCache activation_forward(Activation kind, const Tensor& x);
Tensor activation_backward(const ActivationCache& cache, const Tensor& grad_output);

}  // namespace cdae::nn
